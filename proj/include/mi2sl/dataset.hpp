#ifndef MI2SL_DATASET_HPP
#define MI2SL_DATASET_HPP

#include <string>
#include <vector>

#include "mi2sl/mi2sl.hpp"

namespace mi2sl {

struct ParseError : InvalidParameterError {
  using InvalidParameterError::InvalidParameterError;
};

/// Rectangular numeric table with named columns. Row order is significant and
/// defines unit identity against the SWM.
struct Dataset {
  std::vector<std::string> columns;
  Matrix values;  // n rows x columns

  int n() const { return static_cast<int>(values.rows()); }
  int column_index(const std::string& name) const;  // -1 when absent
  Vector column(const std::string& name) const;     // throws when absent
};

struct EstimationSpec {
  std::string outcome;
  std::string endogenous;
  std::vector<std::string> exogenous;
  std::vector<std::string> instruments;
  FittedVariant variant = FittedVariant::lasso;
  bool robust = true;
};

/// Strict CSV reader: header row required, every cell numeric, every row
/// rectangular. Non-numeric cells are reported with row and column.
Dataset read_dataset_csv(const std::string& path);

/// Validate the spec against the dataset and assemble RegressionData.
RegressionData build_regression_data(const Dataset& data, const EstimationSpec& spec);

/// n x n SWM from a headerless CSV of reals.
SpatialWeights read_swm_csv(const std::string& path);
void write_swm_csv(const SpatialWeights& w, const std::string& path);

/// Coordinates file: header `id,lat,lon`.
std::vector<Coordinate> read_coords_csv(const std::string& path);

}  // namespace mi2sl

#endif
