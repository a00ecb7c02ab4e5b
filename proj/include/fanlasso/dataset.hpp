#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fanlasso/matrix.hpp"

namespace fanlasso {

enum class NormalizeMode { MinMax, ZScore, None };

const char* normalize_mode_name(NormalizeMode mode);
NormalizeMode parse_normalize_mode(std::string_view name);

// Feature block plus labels from one CSV file. Features are stored already
// normalized; shift/scale record the per-column transform
//   stored = (raw - shift) / scale
// with scale == 0 marking a constant column (stored as 0, denormalized back
// to shift). Labels are never normalized.
struct TabularDataset {
  Matrix x;
  std::vector<double> y;  // empty when no label column was requested
  std::vector<std::string> feature_names;
  std::string label_name;
  NormalizeMode mode = NormalizeMode::MinMax;
  std::vector<double> shift;
  std::vector<double> scale;
  std::size_t dropped_rows = 0;  // rows discarded for missing cells

  std::size_t size() const { return x.rows(); }
};

// Strict comma-separated ingestion: first line is the header, cells are
// numeric, empty / "?" / "NA" cells mark the row as missing and drop it.
// Pass a label column name to split it out of the feature block; rows whose
// label is missing are dropped like any other missing cell.
TabularDataset load_csv(const std::string& path, const std::optional<std::string>& label_column,
                        NormalizeMode mode);

// Column names from the header line alone, without parsing the body.
std::vector<std::string> csv_header(const std::string& path);

// Reverse the stored per-column transform.
Matrix denormalized_features(const TabularDataset& ds);

// The transform alone, detached from the data it was fit on. Saved next to
// trained models so fresh data can be scaled exactly like the training data.
struct NormalizationRecord {
  NormalizeMode mode = NormalizeMode::MinMax;
  std::vector<std::string> feature_names;
  std::vector<double> shift;
  std::vector<double> scale;

  bool operator==(const NormalizationRecord&) const = default;
};

NormalizationRecord record_of(const TabularDataset& ds);

// Apply a stored transform to a raw feature block. The column names must
// match the record exactly (same order).
Matrix apply_record(const NormalizationRecord& record, const Matrix& raw,
                    const std::vector<std::string>& feature_names);

struct SplitFractions {
  double train = 0.8;
  double valid = 0.1;
  double test = 0.1;

  bool operator==(const SplitFractions&) const = default;
};

// Row indices for one seeded split. The unlabeled block is carved out of the
// gross training block, so train / valid / test / unlabeled are disjoint and
// together cover every row.
struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> valid;
  std::vector<std::size_t> test;
  std::vector<std::size_t> unlabeled;
};

// Seeded shuffle then contiguous slicing. Validation and test sizes are the
// floored fractions, the remainder goes to training; the unlabeled count is
// the floored fraction of the gross training block. A block whose configured
// fraction is positive must come out non-empty.
SplitIndices split_dataset(std::size_t n, const SplitFractions& fractions,
                           double unlabeled_fraction_of_train, std::uint64_t seed);

// Gather the given rows of a dataset's feature block (and labels, when
// present).
Matrix gather_rows(const Matrix& x, const std::vector<std::size_t>& rows);
std::vector<double> gather_labels(const std::vector<double>& y,
                                  const std::vector<std::size_t>& rows);

}  // namespace fanlasso
