#include "mi2sl/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace mi2sl {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) {
    // trim surrounding whitespace
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

double parse_cell(const std::string& cell, int row, const std::string& col) {
  double v;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last)
    throw ParseError("non-numeric cell '" + cell + "' at row " +
                     std::to_string(row) + ", column '" + col + "'");
  return v;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

}  // namespace

int Dataset::column_index(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  return it == columns.end() ? -1 : static_cast<int>(it - columns.begin());
}

Vector Dataset::column(const std::string& name) const {
  const int j = column_index(name);
  if (j < 0) throw ParseError("missing column: " + name);
  return values.col(j);
}

Dataset read_dataset_csv(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw ParseError("empty data file: " + path);

  Dataset out;
  out.columns = split_csv_line(lines[0]);
  const int ncol = static_cast<int>(out.columns.size());
  if (ncol == 0) throw ParseError("header row has no columns: " + path);

  const int n = static_cast<int>(lines.size()) - 1;
  out.values.resize(n, ncol);
  for (int r = 0; r < n; ++r) {
    const auto cells = split_csv_line(lines[r + 1]);
    if (static_cast<int>(cells.size()) != ncol)
      throw ParseError("row " + std::to_string(r + 1) + " has " +
                       std::to_string(cells.size()) + " cells, expected " +
                       std::to_string(ncol));
    for (int c = 0; c < ncol; ++c)
      out.values(r, c) = parse_cell(cells[c], r + 1, out.columns[c]);
  }
  return out;
}

RegressionData build_regression_data(const Dataset& data, const EstimationSpec& spec) {
  if (spec.instruments.empty())
    throw InvalidParameterError("instrument list must be nonempty");
  for (const auto& name : {spec.outcome, spec.endogenous})
    if (data.column_index(name) < 0) throw ParseError("missing column: " + name);
  for (const auto& name : spec.exogenous)
    if (data.column_index(name) < 0) throw ParseError("missing column: " + name);
  for (const auto& name : spec.instruments)
    if (data.column_index(name) < 0) throw ParseError("missing column: " + name);

  const int n = data.n();
  RegressionData rd;
  rd.y = data.column(spec.outcome);
  rd.x2 = data.column(spec.endogenous);
  rd.X1.resize(n, spec.exogenous.size());
  for (std::size_t j = 0; j < spec.exogenous.size(); ++j)
    rd.X1.col(j) = data.column(spec.exogenous[j]);
  rd.Z2.resize(n, spec.instruments.size());
  for (std::size_t j = 0; j < spec.instruments.size(); ++j)
    rd.Z2.col(j) = data.column(spec.instruments[j]);
  return rd;
}

SpatialWeights read_swm_csv(const std::string& path) {
  const auto lines = read_lines(path);
  const int n = static_cast<int>(lines.size());
  if (n < 2) throw ParseError("SWM file must have at least 2 rows: " + path);

  Matrix w(n, n);
  for (int r = 0; r < n; ++r) {
    const auto cells = split_csv_line(lines[r]);
    if (static_cast<int>(cells.size()) != n)
      throw ParseError("SWM row " + std::to_string(r) + " has " +
                       std::to_string(cells.size()) + " cells, expected " +
                       std::to_string(n));
    for (int c = 0; c < n; ++c) w(r, c) = parse_cell(cells[c], r, std::to_string(c));
  }
  if ((w - w.transpose()).cwiseAbs().maxCoeff() != 0.0)
    throw InvalidParameterError("SWM file is not symmetric");
  if (w.diagonal().cwiseAbs().maxCoeff() != 0.0)
    throw InvalidParameterError("SWM file has nonzero diagonal entries");
  if (w.minCoeff() < 0.0)
    throw InvalidParameterError("SWM file has negative entries");

  SpatialWeights out;
  out.weights = std::move(w);
  out.provenance.kind = ProvenanceKind::user_supplied;
  return out;
}

void write_swm_csv(const SpatialWeights& w, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write file: " + path);
  out << std::setprecision(17);
  const int n = w.n();
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      if (c) out << ',';
      out << w.weights(r, c);
    }
    out << '\n';
  }
}

std::vector<Coordinate> read_coords_csv(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw ParseError("empty coordinates file: " + path);
  const auto header = split_csv_line(lines[0]);
  if (header.size() != 3 || header[0] != "id" || header[1] != "lat" || header[2] != "lon")
    throw ParseError("coordinates file must have header id,lat,lon");

  std::vector<Coordinate> coords;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto cells = split_csv_line(lines[r]);
    if (cells.size() != 3)
      throw ParseError("coordinates row " + std::to_string(r) + " malformed");
    coords.push_back({parse_cell(cells[1], static_cast<int>(r), "lat"),
                      parse_cell(cells[2], static_cast<int>(r), "lon")});
  }
  return coords;
}

}  // namespace mi2sl
