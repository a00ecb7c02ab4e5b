#include "fanlasso/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fanlasso/common.hpp"
#include "fanlasso/rng.hpp"

namespace fanlasso {

const char* normalize_mode_name(NormalizeMode mode) {
  switch (mode) {
    case NormalizeMode::MinMax: return "minmax";
    case NormalizeMode::ZScore: return "zscore";
    case NormalizeMode::None: return "none";
  }
  throw ValidationError("normalize_mode_name: unknown mode");
}

NormalizeMode parse_normalize_mode(std::string_view name) {
  if (name == "minmax") return NormalizeMode::MinMax;
  if (name == "zscore") return NormalizeMode::ZScore;
  if (name == "none") return NormalizeMode::None;
  throw ValidationError("parse_normalize_mode: unknown mode '" + std::string(name) + "'");
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_cells(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      cells.push_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  return cells;
}

bool is_missing(std::string_view cell) { return cell.empty() || cell == "?" || cell == "NA"; }

double parse_cell(std::string_view cell, std::size_t row, const std::string& column) {
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc{} || res.ptr != end) {
    throw DataError("load_csv: row " + std::to_string(row) + ", column '" + column +
                    "': cannot parse '" + std::string(cell) + "'");
  }
  if (!std::isfinite(value)) {
    throw DataError("load_csv: row " + std::to_string(row) + ", column '" + column +
                    "': non-finite value");
  }
  return value;
}

}  // namespace

TabularDataset load_csv(const std::string& path, const std::optional<std::string>& label_column,
                        NormalizeMode mode) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("load_csv: cannot read file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string content = buffer.str();

  std::vector<std::string_view> lines;
  {
    std::string_view rest = content;
    while (!rest.empty()) {
      const std::size_t pos = rest.find('\n');
      std::string_view line = rest.substr(0, pos);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      lines.push_back(line);
      if (pos == std::string_view::npos) break;
      rest.remove_prefix(pos + 1);
    }
    while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  }
  if (lines.empty()) throw DataError("load_csv: file '" + path + "' is empty");

  const std::vector<std::string_view> header = split_cells(lines[0]);
  std::vector<std::string> names(header.begin(), header.end());
  std::size_t label_index = names.size();
  if (label_column) {
    const auto it = std::find(names.begin(), names.end(), *label_column);
    if (it == names.end()) {
      throw DataError("load_csv: label column '" + *label_column + "' not found in '" + path +
                      "'");
    }
    label_index = static_cast<std::size_t>(it - names.begin());
  }

  TabularDataset ds;
  ds.mode = mode;
  if (label_column) ds.label_name = *label_column;
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (j != label_index) ds.feature_names.push_back(names[j]);
  }
  const std::size_t p = ds.feature_names.size();
  if (p == 0) throw DataError("load_csv: file '" + path + "' has no feature columns");

  std::vector<double> raw;
  std::vector<double> labels;
  std::size_t kept = 0;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::vector<std::string_view> cells = split_cells(lines[li]);
    if (cells.size() != names.size()) {
      throw DataError("load_csv: row " + std::to_string(li) + ": expected " +
                      std::to_string(names.size()) + " cells, got " +
                      std::to_string(cells.size()));
    }
    const bool missing =
        std::any_of(cells.begin(), cells.end(), [](std::string_view c) { return is_missing(c); });
    if (missing) {
      ++ds.dropped_rows;
      continue;
    }
    for (std::size_t j = 0; j < cells.size(); ++j) {
      const double value = parse_cell(cells[j], li, names[j]);
      if (j == label_index) {
        labels.push_back(value);
      } else {
        raw.push_back(value);
      }
    }
    ++kept;
  }
  if (kept == 0) throw DataError("load_csv: file '" + path + "' has no usable rows");

  ds.x = Matrix(kept, p);
  std::copy(raw.begin(), raw.end(), ds.x.data());
  ds.y = std::move(labels);

  ds.shift.assign(p, 0.0);
  ds.scale.assign(p, 1.0);
  if (mode == NormalizeMode::MinMax) {
    for (std::size_t j = 0; j < p; ++j) {
      double lo = ds.x(0, j), hi = ds.x(0, j);
      for (std::size_t i = 1; i < kept; ++i) {
        lo = std::min(lo, ds.x(i, j));
        hi = std::max(hi, ds.x(i, j));
      }
      ds.shift[j] = lo;
      ds.scale[j] = hi - lo;
    }
  } else if (mode == NormalizeMode::ZScore) {
    for (std::size_t j = 0; j < p; ++j) {
      double sum = 0.0;
      for (std::size_t i = 0; i < kept; ++i) sum += ds.x(i, j);
      const double mean = sum / static_cast<double>(kept);
      double ss = 0.0;
      for (std::size_t i = 0; i < kept; ++i) {
        const double d = ds.x(i, j) - mean;
        ss += d * d;
      }
      const double sd = kept > 1 ? std::sqrt(ss / static_cast<double>(kept - 1)) : 0.0;
      ds.shift[j] = mean;
      ds.scale[j] = sd;
    }
  }
  if (mode != NormalizeMode::None) {
    for (std::size_t j = 0; j < p; ++j) {
      for (std::size_t i = 0; i < kept; ++i) {
        ds.x(i, j) = ds.scale[j] == 0.0 ? 0.0 : (ds.x(i, j) - ds.shift[j]) / ds.scale[j];
      }
    }
  }
  return ds;
}

std::vector<std::string> csv_header(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("csv_header: cannot read file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("csv_header: file '" + path + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto cells = split_cells(line);
  return std::vector<std::string>(cells.begin(), cells.end());
}

Matrix denormalized_features(const TabularDataset& ds) {
  Matrix out = ds.x;
  for (std::size_t j = 0; j < out.cols(); ++j) {
    for (std::size_t i = 0; i < out.rows(); ++i) {
      out(i, j) = ds.scale[j] == 0.0 ? ds.shift[j] : out(i, j) * ds.scale[j] + ds.shift[j];
    }
  }
  return out;
}

NormalizationRecord record_of(const TabularDataset& ds) {
  return NormalizationRecord{ds.mode, ds.feature_names, ds.shift, ds.scale};
}

Matrix apply_record(const NormalizationRecord& record, const Matrix& raw,
                    const std::vector<std::string>& feature_names) {
  if (feature_names != record.feature_names) {
    if (feature_names.size() != record.feature_names.size()) {
      throw DataError("apply_record: the stored record expects " +
                      std::to_string(record.feature_names.size()) +
                      " feature columns, the file provides " +
                      std::to_string(feature_names.size()));
    }
    throw DataError("apply_record: feature columns do not match the stored record");
  }
  if (raw.cols() != record.feature_names.size()) {
    throw ValidationError("apply_record: column count does not match the record");
  }
  if (record.mode == NormalizeMode::None) return raw;
  Matrix out = raw;
  for (std::size_t j = 0; j < out.cols(); ++j) {
    for (std::size_t i = 0; i < out.rows(); ++i) {
      out(i, j) = record.scale[j] == 0.0 ? 0.0 : (out(i, j) - record.shift[j]) / record.scale[j];
    }
  }
  return out;
}

SplitIndices split_dataset(std::size_t n, const SplitFractions& fractions,
                           double unlabeled_fraction_of_train, std::uint64_t seed) {
  if (n == 0) throw ValidationError("split_dataset: nothing to split");
  const double sum = fractions.train + fractions.valid + fractions.test;
  if (!(fractions.train >= 0.0) || !(fractions.valid >= 0.0) || !(fractions.test >= 0.0)) {
    throw ValidationError("split_dataset: fractions must be nonnegative");
  }
  if (std::fabs(sum - 1.0) > 1e-9) {
    throw ValidationError("split_dataset: fractions must sum to 1");
  }
  if (!(unlabeled_fraction_of_train >= 0.0) || unlabeled_fraction_of_train >= 1.0) {
    throw ValidationError("split_dataset: unlabeled fraction must lie in [0, 1)");
  }

  // the 1e-9 nudge keeps 0.3 * 10 from flooring to 2
  const std::size_t n_valid =
      static_cast<std::size_t>(fractions.valid * static_cast<double>(n) + 1e-9);
  const std::size_t n_test =
      static_cast<std::size_t>(fractions.test * static_cast<double>(n) + 1e-9);
  if (n_valid + n_test >= n) throw ValidationError("split_dataset: training block is empty");
  const std::size_t n_train_gross = n - n_valid - n_test;
  if (fractions.valid > 0.0 && n_valid == 0) {
    throw ValidationError("split_dataset: validation block is empty");
  }
  if (fractions.test > 0.0 && n_test == 0) {
    throw ValidationError("split_dataset: test block is empty");
  }
  const std::size_t n_unlabeled = static_cast<std::size_t>(
      unlabeled_fraction_of_train * static_cast<double>(n_train_gross) + 1e-9);
  if (unlabeled_fraction_of_train > 0.0 && n_unlabeled == 0) {
    throw ValidationError("split_dataset: unlabeled block is empty");
  }
  if (n_unlabeled >= n_train_gross) {
    throw ValidationError("split_dataset: unlabeled block swallows the training block");
  }

  Rng rng(seed);
  const std::vector<std::size_t> order = shuffled_indices(n, rng);
  SplitIndices out;
  out.unlabeled.assign(order.begin(), order.begin() + n_unlabeled);
  out.train.assign(order.begin() + n_unlabeled, order.begin() + n_train_gross);
  out.valid.assign(order.begin() + n_train_gross, order.begin() + n_train_gross + n_valid);
  out.test.assign(order.begin() + n_train_gross + n_valid, order.end());
  return out;
}

Matrix gather_rows(const Matrix& x, const std::vector<std::size_t>& rows) {
  Matrix out(rows.size(), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= x.rows()) throw ValidationError("gather_rows: index out of range");
    std::copy(x.row(rows[i]).begin(), x.row(rows[i]).end(), out.row(i).begin());
  }
  return out;
}

std::vector<double> gather_labels(const std::vector<double>& y,
                                  const std::vector<std::size_t>& rows) {
  std::vector<double> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= y.size()) throw ValidationError("gather_labels: index out of range");
    out[i] = y[rows[i]];
  }
  return out;
}

}  // namespace fanlasso
