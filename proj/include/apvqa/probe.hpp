#pragma once

// Layer-wise linear probing of hidden states: HSD1 dump I/O, per-fold
// standardization, a one-vs-rest linear SVM trained with Pegasos-style
// stochastic subgradient descent, stratified k-fold cross-validation and a
// per-layer sweep.

#include <apvqa/dataset_io.hpp>
#include <apvqa/error.hpp>
#include <apvqa/geometry.hpp>
#include <apvqa/parallel.hpp>
#include <apvqa/png_io.hpp>
#include <apvqa/rng.hpp>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace apvqa {

struct ProbeRecord {
  std::string sample_id;
  PositionLabel label = PositionLabel::TopLeft;
  std::vector<float> features;
};

struct HiddenDump {
  int layer_index = 0;
  std::uint32_t dim = 0;
  std::vector<ProbeRecord> records;
};

struct ProbeConfig {
  int folds = 3;
  double c = 1.0;
  int epochs = 20;
  std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// HSD1 binary format (little-endian):
//   "HSD1" u16 version=1  u16 layer_index  u32 dim  u32 count
//   count x { u16 id_len, id bytes, u8 label_index, dim x f32 }

namespace hsd {

inline constexpr char kMagic[4] = {'H', 'S', 'D', '1'};
inline constexpr std::uint16_t kVersion = 1;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  template <typename T>
  void le(T v) {
    using U = std::make_unsigned_t<T>;
    U u = static_cast<U>(v);
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
  }
  void f32(float f) { le(std::bit_cast<std::uint32_t>(f)); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}
  std::string_view bytes(std::size_t n) {
    if (data_.size() - pos_ < n) throw InputError("HSD1: truncated file at byte " + std::to_string(pos_));
    auto v = data_.substr(pos_, n);
    pos_ += n;
    return v;
  }
  template <typename T>
  T le() {
    const auto b = bytes(sizeof(T));
    std::make_unsigned_t<T> u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      u |= static_cast<std::make_unsigned_t<T>>(static_cast<unsigned char>(b[i])) << (8 * i);
    }
    return static_cast<T>(u);
  }
  float f32() { return std::bit_cast<float>(le<std::uint32_t>()); }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace hsd

inline void validate_dump(const HiddenDump& d) {
  std::set<std::string_view> ids;
  for (const auto& r : d.records) {
    if (r.features.size() != d.dim) {
      throw InputError("layer " + std::to_string(d.layer_index) + ": record " + r.sample_id +
                       " has dim " + std::to_string(r.features.size()) + ", expected " +
                       std::to_string(d.dim));
    }
    if (!ids.insert(r.sample_id).second) {
      throw InputError("layer " + std::to_string(d.layer_index) + ": duplicate sample id " + r.sample_id);
    }
  }
}

inline std::string encode_dump(const HiddenDump& d) {
  validate_dump(d);
  if (d.layer_index < 0 || d.layer_index > 0xffff) throw InputError("layer index out of u16 range");
  hsd::Writer w;
  w.bytes(hsd::kMagic, 4);
  w.le<std::uint16_t>(hsd::kVersion);
  w.le<std::uint16_t>(static_cast<std::uint16_t>(d.layer_index));
  w.le<std::uint32_t>(d.dim);
  w.le<std::uint32_t>(static_cast<std::uint32_t>(d.records.size()));
  for (const auto& r : d.records) {
    if (r.sample_id.size() > 0xffff) throw InputError("sample id too long for HSD1");
    w.le<std::uint16_t>(static_cast<std::uint16_t>(r.sample_id.size()));
    w.bytes(r.sample_id.data(), r.sample_id.size());
    w.le<std::uint8_t>(static_cast<std::uint8_t>(index_of(r.label)));
    for (float f : r.features) w.f32(f);
  }
  return w.take();
}

inline HiddenDump decode_dump(std::string_view data) {
  hsd::Reader r(data);
  if (r.bytes(4) != std::string_view(hsd::kMagic, 4)) throw InputError("HSD1: bad magic");
  const auto version = r.le<std::uint16_t>();
  if (version != hsd::kVersion) throw InputError("HSD1: unsupported version " + std::to_string(version));
  HiddenDump d;
  d.layer_index = r.le<std::uint16_t>();
  d.dim = r.le<std::uint32_t>();
  const auto count = r.le<std::uint32_t>();
  d.records.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    ProbeRecord rec;
    const auto len = r.le<std::uint16_t>();
    rec.sample_id = std::string(r.bytes(len));
    const auto label = r.le<std::uint8_t>();
    if (label >= kNumLabels) throw InputError("HSD1: label index " + std::to_string(label) + " out of range");
    rec.label = kAllLabels[label];
    rec.features.resize(d.dim);
    for (auto& f : rec.features) f = r.f32();
    d.records.push_back(std::move(rec));
  }
  if (!r.done()) throw InputError("HSD1: trailing bytes after last record");
  validate_dump(d);
  return d;
}

inline void write_dump(const HiddenDump& d, const fs::path& path) { write_file_atomic(path, encode_dump(d)); }

inline HiddenDump read_dump(const fs::path& path) {
  try {
    return decode_dump(read_file(path));
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

// Dump files listed by <dir>/manifest.json ({"files": [...]}, entries either
// paths or {"path": ...}), or every *.hsd file in name order when there is no manifest.
inline std::vector<HiddenDump> read_dump_directory(const fs::path& dir) {
  std::vector<fs::path> files;
  const fs::path manifest = dir / "manifest.json";
  if (fs::exists(manifest)) {
    const ojson j = read_json_file(manifest);
    if (!j.contains("files") || !j["files"].is_array()) throw InputError("dump manifest lacks a 'files' array");
    for (const auto& f : j["files"]) {
      files.push_back(dir / (f.is_string() ? f.get<std::string>() : f.at("path").get<std::string>()));
    }
  } else {
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.path().extension() == ".hsd") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
  }
  std::vector<HiddenDump> dumps;
  for (const auto& f : files) dumps.push_back(read_dump(f));
  return dumps;
}

// ---------------------------------------------------------------------------
// Features

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
};

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stddev;  // 0 marks a pass-through dimension

  static Standardizer fit(const Matrix& train) {
    if (train.rows == 0) throw InputError("cannot standardize an empty training set");
    Standardizer s;
    s.mean.assign(train.cols, 0.0);
    s.stddev.assign(train.cols, 0.0);
    for (std::size_t i = 0; i < train.rows; ++i) {
      const auto r = train.row(i);
      for (std::size_t j = 0; j < train.cols; ++j) s.mean[j] += r[j];
    }
    for (auto& m : s.mean) m /= static_cast<double>(train.rows);
    for (std::size_t i = 0; i < train.rows; ++i) {
      const auto r = train.row(i);
      for (std::size_t j = 0; j < train.cols; ++j) {
        const double d = r[j] - s.mean[j];
        s.stddev[j] += d * d;
      }
    }
    for (std::size_t j = 0; j < train.cols; ++j) {
      const double sd = std::sqrt(s.stddev[j] / static_cast<double>(train.rows));
      s.stddev[j] = sd > 1e-12 * std::max(1.0, std::abs(s.mean[j])) ? sd : 0.0;
    }
    return s;
  }

  Matrix transform(const Matrix& x) const {
    if (x.cols != mean.size()) throw InputError("standardize: dimension mismatch");
    Matrix out = x;
    for (std::size_t i = 0; i < out.rows; ++i) {
      auto r = out.row(i);
      for (std::size_t j = 0; j < out.cols; ++j) {
        if (stddev[j] != 0.0) r[j] = (r[j] - mean[j]) / stddev[j];
      }
    }
    return out;
  }
};

struct Standardized {
  Matrix train;
  Matrix applied;
  Standardizer stats;
};

// Statistics come from `train` only and are applied to both matrices.
inline Standardized standardize(const Matrix& train, const Matrix& apply_to) {
  Standardized s;
  s.stats = Standardizer::fit(train);
  s.train = s.stats.transform(train);
  s.applied = s.stats.transform(apply_to);
  return s;
}

// ---------------------------------------------------------------------------
// One-vs-rest linear SVM

struct LinearSvm {
  std::size_t dim = 0;
  std::array<std::vector<double>, kNumLabels> weights;  // dim + 1 entries, last is the bias
  std::array<bool, kNumLabels> trained{};

  double bias(int k) const { return weights[k][dim]; }

  std::array<double, kNumLabels> scores(std::span<const double> x) const {
    std::array<double, kNumLabels> s{};
    for (int k = 0; k < kNumLabels; ++k) {
      if (!trained[k]) {
        s[k] = -std::numeric_limits<double>::infinity();
        continue;
      }
      double acc = weights[k][dim];
      for (std::size_t j = 0; j < dim; ++j) acc += weights[k][j] * x[j];
      s[k] = acc;
    }
    return s;
  }

  // Ties resolve to the lowest label index.
  PositionLabel predict(std::span<const double> x) const {
    const auto s = scores(x);
    int best = 0;
    for (int k = 1; k < kNumLabels; ++k) {
      if (s[k] > s[best]) best = k;
    }
    return kAllLabels[best];
  }
};

// Minimizes lambda/2 |w|^2 + 1/n sum hinge(y w.x) per class with lambda = 1/(C n)
// and step 1/(lambda t). The bias is an extra constant-1 feature.
inline LinearSvm train_linear_svm(const Matrix& x, std::span<const PositionLabel> y,
                                  const ProbeConfig& cfg) {
  if (x.rows != y.size()) throw InputError("feature/label count mismatch");
  if (!(cfg.c > 0.0)) throw ConfigError("regularization C must be positive");
  if (cfg.epochs < 1) throw ConfigError("epochs must be at least 1");
  std::array<std::size_t, kNumLabels> class_count{};
  for (auto l : y) ++class_count[index_of(l)];
  const auto present = std::count_if(class_count.begin(), class_count.end(), [](auto n) { return n > 0; });
  if (present < 2) throw ConfigError("linear SVM needs at least two classes");

  const std::size_t n = x.rows;
  const std::size_t d = x.cols;
  const double lambda = 1.0 / (cfg.c * static_cast<double>(n));

  LinearSvm model;
  model.dim = d;
  // w_k = scale_k * v_k keeps the shrink step O(1).
  std::array<std::vector<double>, kNumLabels> v;
  std::array<double, kNumLabels> scale{};
  for (int k = 0; k < kNumLabels; ++k) {
    model.trained[k] = class_count[k] > 0;
    v[k].assign(d + 1, 0.0);
    scale[k] = 1.0;
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(cfg.seed, "svm:order"));
  std::uint64_t t = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t i : order) {
      ++t;
      const double eta = 1.0 / (lambda * static_cast<double>(t));
      const double shrink = 1.0 - eta * lambda;
      const auto xi = x.row(i);
      for (int k = 0; k < kNumLabels; ++k) {
        if (!model.trained[k]) continue;
        auto& vk = v[k];
        double dot = vk[d];
        for (std::size_t j = 0; j < d; ++j) dot += vk[j] * xi[j];
        const double yk = (index_of(y[i]) == k) ? 1.0 : -1.0;
        const double margin = yk * scale[k] * dot;
        if (shrink <= 0.0) {
          std::fill(vk.begin(), vk.end(), 0.0);
          scale[k] = 1.0;
        } else {
          scale[k] *= shrink;
        }
        if (margin < 1.0) {
          const double step = eta * yk / scale[k];
          for (std::size_t j = 0; j < d; ++j) vk[j] += step * xi[j];
          vk[d] += step;
        }
      }
    }
  }
  for (int k = 0; k < kNumLabels; ++k) {
    model.weights[k].resize(d + 1);
    for (std::size_t j = 0; j <= d; ++j) model.weights[k][j] = scale[k] * v[k][j];
  }
  return model;
}

inline double accuracy(const LinearSvm& m, const Matrix& x, std::span<const PositionLabel> y) {
  if (x.rows == 0) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < x.rows; ++i) correct += m.predict(x.row(i)) == y[i];
  return static_cast<double>(correct) / static_cast<double>(x.rows);
}

// ---------------------------------------------------------------------------
// Cross-validation

// Fold id per record. Within each label the records are shuffled and dealt
// round-robin; the deal position carries over between labels so fold sizes
// differ by at most one overall and per class.
inline std::vector<int> stratified_folds(const HiddenDump& dump, int folds, std::uint64_t seed) {
  if (folds < 2) throw ConfigError("folds must be at least 2");
  std::array<std::vector<std::size_t>, kNumLabels> by_label;
  for (std::size_t i = 0; i < dump.records.size(); ++i) by_label[index_of(dump.records[i].label)].push_back(i);
  int present = 0;
  for (int l = 0; l < kNumLabels; ++l) {
    if (by_label[l].empty()) continue;
    ++present;
    if (by_label[l].size() < static_cast<std::size_t>(folds)) {
      throw InputError("label '" + std::string(kLabelNames[l]) + "' has " +
                       std::to_string(by_label[l].size()) + " examples, fewer than " +
                       std::to_string(folds) + " folds");
    }
  }
  if (present < 2) throw ConfigError("cross-validation needs at least two labels");
  std::vector<int> fold(dump.records.size(), 0);
  std::size_t deal = 0;
  for (int l = 0; l < kNumLabels; ++l) {
    auto& members = by_label[l];
    std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
      return dump.records[a].sample_id < dump.records[b].sample_id;
    });
    Rng rng(derive_seed(seed, "folds:" + std::to_string(l)));
    rng.shuffle(std::span<std::size_t>(members));
    for (std::size_t i : members) fold[i] = static_cast<int>(deal++ % folds);
  }
  return fold;
}

struct CvResult {
  double mean_accuracy = 0.0;
  std::vector<double> per_fold;
  std::vector<std::size_t> fold_sizes;
};

inline Matrix features_of(const HiddenDump& dump, std::span<const std::size_t> rows) {
  Matrix m(rows.size(), dump.dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& f = dump.records[rows[i]].features;
    std::copy(f.begin(), f.end(), m.row(i).begin());
  }
  return m;
}

inline CvResult cross_validate(const HiddenDump& dump, const ProbeConfig& cfg) {
  validate_dump(dump);
  const std::vector<int> fold = stratified_folds(dump, cfg.folds, cfg.seed);
  CvResult res;
  for (int f = 0; f < cfg.folds; ++f) {
    std::vector<std::size_t> train_rows, test_rows;
    for (std::size_t i = 0; i < fold.size(); ++i) (fold[i] == f ? test_rows : train_rows).push_back(i);
    std::vector<PositionLabel> train_y, test_y;
    for (auto i : train_rows) train_y.push_back(dump.records[i].label);
    for (auto i : test_rows) test_y.push_back(dump.records[i].label);
    const Standardized z = standardize(features_of(dump, train_rows), features_of(dump, test_rows));
    ProbeConfig fold_cfg = cfg;
    fold_cfg.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(f));
    const LinearSvm model = train_linear_svm(z.train, train_y, fold_cfg);
    res.per_fold.push_back(accuracy(model, z.applied, test_y));
    res.fold_sizes.push_back(test_rows.size());
  }
  res.mean_accuracy = std::accumulate(res.per_fold.begin(), res.per_fold.end(), 0.0) /
                      static_cast<double>(res.per_fold.size());
  return res;
}

// ---------------------------------------------------------------------------
// Layer sweep

struct LayerResult {
  int layer = 0;
  double mean = 0.0;
  double stddev = 0.0;           // sample std across runs; 0 for a single run
  std::vector<CvResult> runs;    // one per dump of this layer, in input order
};

// Dumps sharing a layer index are treated as repeated runs of that layer.
inline std::vector<LayerResult> layer_sweep(std::span<const HiddenDump> dumps, const ProbeConfig& cfg,
                                            unsigned jobs = 1) {
  if (dumps.empty()) throw InputError("layer sweep needs at least one dump");
  std::vector<CvResult> cv(dumps.size());
  parallel_for(dumps.size(), jobs, [&](std::size_t i) { cv[i] = cross_validate(dumps[i], cfg); });
  std::map<int, LayerResult> by_layer;
  for (std::size_t i = 0; i < dumps.size(); ++i) {
    auto& lr = by_layer[dumps[i].layer_index];
    lr.layer = dumps[i].layer_index;
    lr.runs.push_back(cv[i]);
  }
  std::vector<LayerResult> out;
  for (auto& [_, lr] : by_layer) {
    double sum = 0.0;
    for (const auto& r : lr.runs) sum += r.mean_accuracy;
    lr.mean = sum / static_cast<double>(lr.runs.size());
    if (lr.runs.size() > 1) {
      double ss = 0.0;
      for (const auto& r : lr.runs) ss += (r.mean_accuracy - lr.mean) * (r.mean_accuracy - lr.mean);
      lr.stddev = std::sqrt(ss / static_cast<double>(lr.runs.size() - 1));
    }
    out.push_back(std::move(lr));
  }
  return out;
}

inline std::string sweep_csv(const std::vector<LayerResult>& results) {
  std::string out = "layer,mean,std,runs\n";
  char buf[96];
  for (const auto& r : results) {
    std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%zu\n", r.layer, r.mean, r.stddev, r.runs.size());
    out += buf;
  }
  return out;
}

inline ojson sweep_json(const std::vector<LayerResult>& results, const ProbeConfig& cfg) {
  ojson j;
  j["folds"] = cfg.folds;
  j["C"] = cfg.c;
  j["epochs"] = cfg.epochs;
  j["seed"] = cfg.seed;
  ojson layers = ojson::array();
  for (const auto& r : results) {
    ojson l;
    l["layer"] = r.layer;
    l["mean"] = r.mean;
    l["std"] = r.stddev;
    ojson runs = ojson::array();
    for (const auto& run : r.runs) {
      ojson o;
      o["mean_accuracy"] = run.mean_accuracy;
      o["per_fold"] = run.per_fold;
      o["fold_sizes"] = run.fold_sizes;
      runs.push_back(std::move(o));
    }
    l["runs"] = std::move(runs);
    layers.push_back(std::move(l));
  }
  j["layers"] = std::move(layers);
  return j;
}

}  // namespace apvqa
