#include "parvi/dataset.hpp"

#include "parvi/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

namespace parvi {

namespace {

double parse_number(std::string_view tok, const std::string& where) {
  tok = io::trim(tok);
  if (tok.size() > 1 && tok.front() == '+') tok.remove_prefix(1);
  double v = 0.0;
  const auto* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError("non-numeric value '" + std::string(tok) + "' at " + where);
  return v;
}

bool is_index(const std::string& s) { return !s.empty() && std::all_of(s.begin(), s.end(), ::isdigit); }

}  // namespace

Vector normalize_labels(const Vector& raw) {
  std::set<double> distinct(raw.data(), raw.data() + raw.size());
  if (distinct.size() > 2) {
    throw ConfigError("labels are not binary: found " + std::to_string(distinct.size()) + " distinct values");
  }
  Vector out(raw.size());
  if (distinct.size() == 1) {
    out.setConstant(*distinct.begin() > 0.0 ? 1.0 : -1.0);
    return out;
  }
  const double lo = *distinct.begin();
  for (Eigen::Index t = 0; t < raw.size(); ++t) out(t) = raw(t) == lo ? -1.0 : 1.0;
  return out;
}

bool labels_degenerate(const Vector& labels) {
  return labels.size() == 0 || (labels.array() == labels(0)).all();
}

Dataset load_csv(const std::string& path, const std::string& label_column) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read dataset " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("dataset " + path + " is empty");
  std::vector<std::string> header;
  for (auto& h : io::split(line, ',')) header.emplace_back(io::trim(h));
  const std::size_t cols = header.size();
  if (cols < 2) throw ConfigError("dataset " + path + " needs at least one feature and a label column");

  std::size_t label_idx = cols - 1;
  if (!label_column.empty()) {
    auto it = std::find(header.begin(), header.end(), label_column);
    if (it != header.end()) {
      label_idx = static_cast<std::size_t>(it - header.begin());
    } else if (is_index(label_column)) {
      label_idx = std::stoul(label_column);
      if (label_idx >= cols) throw ConfigError("label column index " + label_column + " out of range");
    } else {
      throw ConfigError("label column '" + label_column + "' not found in " + path);
    }
  }

  std::vector<std::vector<double>> rows;
  std::vector<double> raw_labels;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (io::trim(line).empty()) continue;
    const auto toks = io::split(line, ',');
    if (toks.size() != cols) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(cols) + " fields");
    }
    std::vector<double> row;
    row.reserve(cols - 1);
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = parse_number(toks[c], path + ":" + std::to_string(lineno));
      if (c == label_idx) raw_labels.push_back(v);
      else row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError("dataset " + path + " has no data rows");

  Dataset data;
  data.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols - 1));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c + 1 < cols; ++c) {
      data.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  data.labels = normalize_labels(Eigen::Map<const Vector>(raw_labels.data(), static_cast<Eigen::Index>(raw_labels.size())));
  for (std::size_t c = 0; c < cols; ++c) {
    if (c != label_idx) data.feature_names.push_back(header[c]);
  }
  return data;
}

Dataset load_libsvm(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read dataset " + path);
  std::vector<std::vector<std::pair<std::size_t, double>>> rows;
  std::vector<double> raw_labels;
  std::size_t max_index = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = path + ":" + std::to_string(lineno);
    std::istringstream ss(line);
    std::string tok;
    if (!(ss >> tok)) continue;
    raw_labels.push_back(parse_number(tok, where));
    std::vector<std::pair<std::size_t, double>> entries;
    while (ss >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos) throw ConfigError("malformed libsvm entry '" + tok + "' at " + where);
      const double idx = parse_number(std::string_view(tok).substr(0, colon), where);
      if (idx < 1.0 || idx != std::floor(idx)) throw ConfigError("libsvm indices are 1-based integers at " + where);
      const auto i = static_cast<std::size_t>(idx);
      entries.emplace_back(i - 1, parse_number(std::string_view(tok).substr(colon + 1), where));
      max_index = std::max(max_index, i);
    }
    rows.push_back(std::move(entries));
  }
  if (rows.empty() || max_index == 0) throw ConfigError("dataset " + path + " has no data");

  Dataset data;
  data.features = RowMatrix::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(max_index));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (auto [c, v] : rows[r]) data.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
  }
  data.labels = normalize_labels(Eigen::Map<const Vector>(raw_labels.data(), static_cast<Eigen::Index>(raw_labels.size())));
  for (std::size_t c = 0; c < max_index; ++c) data.feature_names.push_back("f" + std::to_string(c + 1));
  return data;
}

Standardizer Standardizer::fit(const RowMatrix& features) {
  Standardizer s;
  const auto n = static_cast<double>(features.rows());
  s.mean = features.colwise().mean().transpose();
  s.scale.resize(features.cols());
  for (Eigen::Index c = 0; c < features.cols(); ++c) {
    const double var = (features.col(c).array() - s.mean(c)).square().sum() / n;
    s.scale(c) = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return s;
}

void Standardizer::apply(RowMatrix& features) const {
  if (features.cols() != mean.size()) throw ConfigError("standardizer: column count mismatch");
  for (Eigen::Index c = 0; c < features.cols(); ++c) {
    features.col(c) = (features.col(c).array() - mean(c)) / scale(c);
  }
}

void append_bias_column(Dataset& data) {
  RowMatrix f(data.features.rows(), data.features.cols() + 1);
  f.leftCols(data.features.cols()) = data.features;
  f.col(data.features.cols()).setOnes();
  data.features = std::move(f);
  data.feature_names.emplace_back("bias");
}

TrainTestSplit train_test_split(const Dataset& data, double train_fraction, CounterRng& rng) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train fraction must lie in (0, 1)");
  const std::size_t n = data.size();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.uniform_index(i)]);
  std::size_t n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n > 1 ? n - 1 : 1);

  auto take = [&](std::size_t begin, std::size_t end) {
    Dataset out;
    out.feature_names = data.feature_names;
    out.features.resize(static_cast<Eigen::Index>(end - begin), data.features.cols());
    out.labels.resize(static_cast<Eigen::Index>(end - begin));
    for (std::size_t k = begin; k < end; ++k) {
      const auto dst = static_cast<Eigen::Index>(k - begin);
      out.features.row(dst) = data.features.row(static_cast<Eigen::Index>(perm[k]));
      out.labels(dst) = data.labels(static_cast<Eigen::Index>(perm[k]));
    }
    return out;
  };
  return {take(0, n_train), take(n_train, n)};
}

Dataset make_separable(std::size_t n, std::size_t p, double margin, CounterRng& rng) {
  if (n == 0 || p == 0) throw ConfigError("synthetic dataset needs n >= 1 and p >= 1");
  Vector dir(static_cast<Eigen::Index>(p));
  for (auto& v : dir) v = rng.normal();
  dir.normalize();

  Dataset data;
  data.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  data.labels.resize(static_cast<Eigen::Index>(n));
  Vector c(static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < n;) {
    for (auto& v : c) v = rng.normal();
    const double s = dir.dot(c);
    if (std::abs(s) < margin) continue;
    data.features.row(static_cast<Eigen::Index>(i)) = c.transpose();
    data.labels(static_cast<Eigen::Index>(i)) = s > 0.0 ? 1.0 : -1.0;
    ++i;
  }
  for (std::size_t k = 0; k < p; ++k) data.feature_names.push_back("x" + std::to_string(k));
  return data;
}

void save_csv(const Dataset& data, const std::string& path) {
  std::string out;
  for (std::size_t c = 0; c < data.n_features(); ++c) {
    out += c < data.feature_names.size() ? data.feature_names[c] : "x" + std::to_string(c);
    out += ',';
  }
  out += "label\n";
  for (Eigen::Index r = 0; r < data.features.rows(); ++r) {
    for (Eigen::Index c = 0; c < data.features.cols(); ++c) {
      out += io::format_double(data.features(r, c));
      out += ',';
    }
    out += data.labels(r) > 0 ? "1\n" : "0\n";
  }
  io::write_text_atomic(path, out);
}

}  // namespace parvi
