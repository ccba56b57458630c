#include "scaffold/output.hpp"

#include <cstdio>
#include <fstream>

namespace scaffold {

std::string format_number(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10e", value == 0.0 ? 0.0 : value);
  return buf;
}

namespace {

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw OutputError("cannot write " + path.string());
  return out;
}

void check_size(const std::string& name, const Vector& v, Eigen::Index expected) {
  if (v.size() != expected) {
    throw std::invalid_argument("vtk field '" + name + "' has " + std::to_string(v.size()) +
                                " entries, expected " + std::to_string(expected));
  }
}

void write_scalars(std::ofstream& out, const std::string& name, const Vector& v) {
  out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
  for (Eigen::Index i = 0; i < v.size(); ++i) out << format_number(v[i]) << '\n';
}

}  // namespace

void write_vtk(const std::filesystem::path& path, const TetMesh& mesh, const VtkFields& fields,
               const std::string& title) {
  const int nn = mesh.num_nodes();
  const int ne = mesh.num_elements();
  for (const auto& [name, v] : fields.point_scalars) check_size(name, v, nn);
  for (const auto& [name, v] : fields.point_vectors) check_size(name, v, 3 * nn);
  for (const auto& [name, v] : fields.cell_scalars) check_size(name, v, ne);

  auto out = open_output(path);
  out << "# vtk DataFile Version 3.0\n" << title.substr(0, 255) << "\nASCII\n";
  out << "DATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << nn << " double\n";
  for (const auto& x : mesh.nodes) {
    out << format_number(x[0]) << ' ' << format_number(x[1]) << ' ' << format_number(x[2])
        << '\n';
  }
  out << "CELLS " << ne << ' ' << 5 * ne << '\n';
  for (const auto& t : mesh.tets) out << "4 " << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << t[3] << '\n';
  out << "CELL_TYPES " << ne << '\n';
  for (int e = 0; e < ne; ++e) out << "10\n";

  if (!fields.point_scalars.empty() || !fields.point_vectors.empty()) {
    out << "POINT_DATA " << nn << '\n';
    for (const auto& [name, v] : fields.point_vectors) {
      out << "VECTORS " << name << " double\n";
      for (int j = 0; j < nn; ++j) {
        out << format_number(v[3 * j]) << ' ' << format_number(v[3 * j + 1]) << ' '
            << format_number(v[3 * j + 2]) << '\n';
      }
    }
    for (const auto& [name, v] : fields.point_scalars) write_scalars(out, name, v);
  }
  if (!fields.cell_scalars.empty()) {
    out << "CELL_DATA " << ne << '\n';
    for (const auto& [name, v] : fields.cell_scalars) write_scalars(out, name, v);
  }
  if (!out) throw OutputError("write failed: " + path.string());
}

std::string csv_escape(const std::string& cell) {
  if (cell.find_first_of(",\"\r\n") == std::string::npos) return cell;
  std::string quoted = "\"";
  for (char c : cell) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  return quoted + '"';
}

struct CsvWriter::Impl {
  std::ofstream out;
  std::filesystem::path path;
};

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : impl_(std::make_unique<Impl>(Impl{open_output(path), path})), columns_(header.size()) {
  row(header);
}

CsvWriter::~CsvWriter() = default;

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) throw std::invalid_argument("csv row has the wrong column count");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) impl_->out << ',';
    impl_->out << csv_escape(cells[i]);
  }
  impl_->out << "\r\n";
  impl_->out.flush();
  if (!impl_->out) throw OutputError("write failed: " + impl_->path.string());
}

void CsvWriter::row(std::initializer_list<double> values) {
  std::vector<std::string> cells;
  cells.reserve(values.size());
  for (double v : values) cells.push_back(format_number(v));
  row(cells);
}

}  // namespace scaffold
