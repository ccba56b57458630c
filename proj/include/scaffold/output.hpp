#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "scaffold/fem.hpp"
#include "scaffold/mesh.hpp"

namespace scaffold {

class OutputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Named nodal / element arrays for a legacy VTK unstructured grid.
struct VtkFields {
  std::vector<std::pair<std::string, Vector>> point_scalars;
  std::vector<std::pair<std::string, Vector>> point_vectors;  // 3 entries per node
  std::vector<std::pair<std::string, Vector>> cell_scalars;
};

/// Legacy ASCII VTK 3.0, DATASET UNSTRUCTURED_GRID with VTK_TETRA cells.
void write_vtk(const std::filesystem::path& path, const TetMesh& mesh, const VtkFields& fields,
               const std::string& title = "scaffold");

/// Fixed-format number used by every text output, so reruns are byte-identical.
std::string format_number(double value);

/// RFC-4180 CSV: header row, one row per record, CRLF line endings.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
  ~CsvWriter();
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  void row(const std::vector<std::string>& cells);
  void row(std::initializer_list<double> values);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::size_t columns_;
};

std::string csv_escape(const std::string& cell);

}  // namespace scaffold
