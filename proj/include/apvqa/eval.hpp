#pragma once

// Scoring of model predictions against a dataset: overall / per-label /
// per-cell / per-region accuracy, majority-vote maps, dual-encoder retrieval
// selection, and report serialization.

#include <apvqa/answer.hpp>
#include <apvqa/dataset_io.hpp>
#include <apvqa/error.hpp>
#include <apvqa/geometry.hpp>
#include <apvqa/png_io.hpp>
#include <apvqa/sample.hpp>

#include <array>
#include <cmath>
#include <cstdio>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

namespace apvqa {

struct RetrievalEmbeddings {
  std::vector<float> image;
  std::vector<std::vector<float>> candidates;  // 9, in the sample's option order
};

struct Prediction {
  std::string sample_id;
  std::optional<std::string> raw_text;
  std::optional<RetrievalEmbeddings> embeddings;
};

enum class ScoringMode { Text, Retrieval };

// ---------------------------------------------------------------------------
// Retrieval

inline std::vector<std::string> build_retrieval_candidates(const VqaSample& s) {
  std::vector<std::string> texts;
  texts.reserve(kNumLabels);
  for (PositionLabel l : s.options) texts.push_back(s.question + " " + std::string(to_string(l)));
  return texts;
}

namespace detail {
inline double dot(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * b[i];
  return acc;
}
}  // namespace detail

// Index of the candidate with the highest cosine similarity; ties go to the lowest index.
inline std::size_t retrieval_select(std::span<const float> image,
                                    std::span<const std::vector<float>> candidates) {
  if (candidates.empty()) throw InputError("no retrieval candidates");
  const double image_norm = std::sqrt(detail::dot(image, image));
  if (image.empty() || image_norm == 0.0) throw InputError("image embedding has zero norm");
  std::size_t best = 0;
  double best_sim = 0.0;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const auto& c = candidates[k];
    if (c.size() != image.size()) throw InputError("candidate embedding dimension mismatch");
    const double norm = std::sqrt(detail::dot(c, c));
    if (norm == 0.0) throw InputError("candidate embedding has zero norm");
    const double sim = detail::dot(image, c) / (image_norm * norm);
    if (k == 0 || sim > best_sim) {
      best = k;
      best_sim = sim;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Report types

inline constexpr int kInvalidBucket = kNumLabels;
inline constexpr int kNumBuckets = kNumLabels + 1;

struct Tally {
  std::size_t correct = 0;
  std::size_t support = 0;
  std::optional<double> accuracy() const {
    if (support == 0) return std::nullopt;
    return static_cast<double>(correct) / static_cast<double>(support);
  }
};

enum class VoteKind { Label, Invalid, NoData };

struct Vote {
  VoteKind kind = VoteKind::NoData;
  PositionLabel label = PositionLabel::TopLeft;  // meaningful for VoteKind::Label
  std::size_t votes = 0;
  std::size_t support = 0;

  std::string name() const {
    switch (kind) {
      case VoteKind::Label: return std::string(to_string(label));
      case VoteKind::Invalid: return "invalid";
      case VoteKind::NoData: return "no-data";
    }
    return {};
  }
  friend bool operator==(const Vote&, const Vote&) = default;
};

using VoteHistogram = std::array<std::size_t, kNumBuckets>;

// Modal bucket; ties resolve to the lowest label index, and the invalid bucket
// loses every tie.
inline Vote majority_of(const VoteHistogram& h) {
  Vote v;
  for (std::size_t n : h) v.support += n;
  if (v.support == 0) return v;
  int best = 0;
  for (int b = 1; b < kNumBuckets; ++b) {
    if (h[b] > h[best]) best = b;
  }
  v.votes = h[best];
  if (best == kInvalidBucket) {
    v.kind = VoteKind::Invalid;
  } else {
    v.kind = VoteKind::Label;
    v.label = kAllLabels[best];
  }
  return v;
}

struct MajorityMaps {
  std::array<Vote, kNumCells> cells{};
  std::array<Vote, kNumLabels> regions{};
};

struct EvalReport {
  ScoringMode mode = ScoringMode::Text;
  std::size_t n_total = 0;
  std::size_t n_correct = 0;
  std::size_t n_valid = 0;
  std::size_t n_missing = 0;
  double overall_accuracy = 0.0;
  double valid_rate = 0.0;
  std::array<Tally, kNumLabels> per_label{};  // by gold label
  std::array<Tally, kNumCells> cells{};
  std::array<Tally, kNumLabels> regions{};    // by target region, row-major
  MajorityMaps majority;
};

// ---------------------------------------------------------------------------
// Scoring

// Predicted bucket per dataset sample (label index, or kInvalidBucket).
inline std::vector<int> resolve_predictions(const Dataset& d, std::span<const Prediction> preds,
                                            ScoringMode mode, std::size_t* missing = nullptr) {
  std::unordered_map<std::string, std::size_t> index;
  index.reserve(d.samples.size());
  for (std::size_t i = 0; i < d.samples.size(); ++i) index.emplace(d.samples[i].id, i);

  std::vector<int> buckets(d.samples.size(), kInvalidBucket);
  std::vector<char> seen(d.samples.size(), 0);
  for (const Prediction& p : preds) {
    const auto it = index.find(p.sample_id);
    if (it == index.end()) throw InputError("prediction for unknown sample id: " + p.sample_id);
    if (seen[it->second]) throw InputError("duplicate prediction for sample id: " + p.sample_id);
    seen[it->second] = 1;
    const VqaSample& s = d.samples[it->second];
    if (mode == ScoringMode::Text) {
      if (!p.raw_text) throw InputError("text scoring needs raw_text for sample " + p.sample_id);
      const ParsedAnswer a = parse_answer(*p.raw_text);
      buckets[it->second] = a.valid ? index_of(*a.label) : kInvalidBucket;
    } else {
      if (!p.embeddings) throw InputError("retrieval scoring needs embeddings for sample " + p.sample_id);
      if (p.embeddings->candidates.size() != kNumLabels) {
        throw InputError("expected 9 candidate embeddings for sample " + p.sample_id);
      }
      const std::size_t k = retrieval_select(p.embeddings->image, p.embeddings->candidates);
      buckets[it->second] = index_of(s.options[k]);
    }
  }
  if (missing) {
    *missing = 0;
    for (char c : seen) *missing += c ? 0 : 1;
  }
  return buckets;
}

inline MajorityMaps majority_from_buckets(const Dataset& d, const std::vector<int>& buckets) {
  std::array<VoteHistogram, kNumCells> cell_hist{};
  std::array<VoteHistogram, kNumLabels> region_hist{};
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    const VqaSample& s = d.samples[i];
    ++cell_hist[cell_index(s.target_cell)][buckets[i]];
    ++region_hist[index_of(label_of(s.target_region))][buckets[i]];
  }
  MajorityMaps m;
  for (int c = 0; c < kNumCells; ++c) m.cells[c] = majority_of(cell_hist[c]);
  for (int r = 0; r < kNumLabels; ++r) m.regions[r] = majority_of(region_hist[r]);
  return m;
}

inline MajorityMaps majority_vote_maps(const Dataset& d, std::span<const Prediction> preds,
                                       ScoringMode mode = ScoringMode::Text) {
  return majority_from_buckets(d, resolve_predictions(d, preds, mode));
}

inline EvalReport score(const Dataset& d, std::span<const Prediction> preds,
                        ScoringMode mode = ScoringMode::Text) {
  EvalReport r;
  r.mode = mode;
  const std::vector<int> buckets = resolve_predictions(d, preds, mode, &r.n_missing);
  r.n_total = d.samples.size();
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    const VqaSample& s = d.samples[i];
    const bool valid = buckets[i] != kInvalidBucket;
    const bool correct = valid && buckets[i] == index_of(s.gold);
    r.n_valid += valid;
    r.n_correct += correct;
    for (Tally* t : {&r.per_label[index_of(s.gold)], &r.cells[cell_index(s.target_cell)],
                     &r.regions[index_of(label_of(s.target_region))]}) {
      ++t->support;
      t->correct += correct;
    }
  }
  if (r.n_total > 0) {
    r.overall_accuracy = static_cast<double>(r.n_correct) / static_cast<double>(r.n_total);
    r.valid_rate = static_cast<double>(r.n_valid) / static_cast<double>(r.n_total);
  }
  r.majority = majority_from_buckets(d, buckets);
  return r;
}

// ---------------------------------------------------------------------------
// Prediction files

inline Prediction prediction_from_json(const ojson& j) {
  try {
    Prediction p;
    p.sample_id = j.at("sample_id").get<std::string>();
    const bool has_text = j.contains("raw_text");
    const bool has_emb = j.contains("image_emb") || j.contains("candidate_embs");
    if (has_text && has_emb) throw InputError("record mixes raw_text and embeddings: " + p.sample_id);
    if (has_text) {
      p.raw_text = j.at("raw_text").is_null() ? std::string() : j.at("raw_text").get<std::string>();
    } else if (has_emb) {
      RetrievalEmbeddings e;
      e.image = j.at("image_emb").get<std::vector<float>>();
      e.candidates = j.at("candidate_embs").get<std::vector<std::vector<float>>>();
      p.embeddings = std::move(e);
    } else {
      throw InputError("record has neither raw_text nor embeddings: " + p.sample_id);
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed prediction record: ") + e.what());
  }
}

inline ojson to_json(const Prediction& p) {
  ojson j;
  j["sample_id"] = p.sample_id;
  if (p.raw_text) j["raw_text"] = *p.raw_text;
  if (p.embeddings) {
    j["image_emb"] = p.embeddings->image;
    j["candidate_embs"] = p.embeddings->candidates;
  }
  return j;
}

inline std::vector<Prediction> read_predictions(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::vector<Prediction> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(prediction_from_json(ojson::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": parse error at byte " +
                       std::to_string(e.byte));
    } catch (const InputError& e) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline void write_predictions(const std::vector<Prediction>& preds, const fs::path& path) {
  std::string text;
  for (const auto& p : preds) text += to_json(p).dump() + "\n";
  write_file_atomic(path, text);
}

// ---------------------------------------------------------------------------
// Reports

inline ojson tally_json(const Tally& t) {
  ojson j;
  if (auto a = t.accuracy()) {
    j["accuracy"] = *a;
  } else {
    j["accuracy"] = nullptr;
  }
  j["correct"] = t.correct;
  j["support"] = t.support;
  return j;
}

inline ojson vote_json(const Vote& v) {
  ojson j;
  j["prediction"] = v.name();
  j["votes"] = v.votes;
  j["support"] = v.support;
  return j;
}

inline ojson report_json(const EvalReport& r) {
  ojson j;
  j["mode"] = r.mode == ScoringMode::Text ? "text" : "retrieval";
  j["n_total"] = r.n_total;
  j["n_correct"] = r.n_correct;
  j["n_valid"] = r.n_valid;
  j["n_missing"] = r.n_missing;
  j["overall_accuracy"] = r.overall_accuracy;
  j["valid_rate"] = r.valid_rate;
  ojson labels;
  for (int l = 0; l < kNumLabels; ++l) labels[std::string(kLabelNames[l])] = tally_json(r.per_label[l]);
  j["per_label_accuracy"] = std::move(labels);
  const auto grid = [](int side, auto&& cell) {
    ojson rows = ojson::array();
    for (int row = 0; row < side; ++row) {
      ojson cols = ojson::array();
      for (int col = 0; col < side; ++col) cols.push_back(cell(row * side + col));
      rows.push_back(std::move(cols));
    }
    return rows;
  };
  j["cell_accuracy"] = grid(kCellsPerSide, [&](int i) { return tally_json(r.cells[i]); });
  j["region_accuracy"] = grid(kRegionsPerSide, [&](int i) { return tally_json(r.regions[i]); });
  j["cell_majority"] = grid(kCellsPerSide, [&](int i) { return vote_json(r.majority.cells[i]); });
  j["region_majority"] = grid(kRegionsPerSide, [&](int i) { return vote_json(r.majority.regions[i]); });
  return j;
}

inline Rgb majority_color(const Vote& v) {
  static constexpr std::array<Rgb, kNumLabels> palette = {{
      {230, 25, 75}, {60, 180, 75}, {255, 225, 25},
      {0, 130, 200}, {245, 130, 48}, {145, 30, 180},
      {70, 240, 240}, {240, 50, 230}, {210, 245, 60},
  }};
  switch (v.kind) {
    case VoteKind::Label: return palette[index_of(v.label)];
    case VoteKind::Invalid: return {128, 128, 128};
    case VoteKind::NoData: return {0, 0, 0};
  }
  return {};
}

inline std::uint8_t heat_value(const Tally& t) {
  const auto a = t.accuracy();
  return a ? static_cast<std::uint8_t>(std::lround(*a * 255.0)) : 0;
}

inline void emit_reports(const EvalReport& r, const fs::path& dir) {
  ensure_directory(dir);
  write_file_atomic(dir / "report.json", report_json(r).dump(2) + "\n");

  std::string acc_csv, maj_csv;
  for (int row = 0; row < kCellsPerSide; ++row) {
    for (int col = 0; col < kCellsPerSide; ++col) {
      const int i = row * kCellsPerSide + col;
      const char* sep = col == 0 ? "" : ",";
      char buf[32];
      if (auto a = r.cells[i].accuracy()) {
        std::snprintf(buf, sizeof buf, "%.6f", *a);
      } else {
        std::snprintf(buf, sizeof buf, "NA");
      }
      acc_csv += sep;
      acc_csv += buf;
      maj_csv += sep;
      maj_csv += r.majority.cells[i].name();
    }
    acc_csv += "\n";
    maj_csv += "\n";
  }
  write_file_atomic(dir / "cell_accuracy.csv", acc_csv);
  write_file_atomic(dir / "cell_majority.csv", maj_csv);

  std::string pgm = "P5\n9 9\n255\n";
  for (int i = 0; i < kNumCells; ++i) pgm.push_back(static_cast<char>(heat_value(r.cells[i])));
  write_file_atomic(dir / "heatmap.pgm", pgm);

  std::string ppm = "P6\n3 3\n255\n";
  for (int i = 0; i < kNumLabels; ++i) {
    const Rgb c = majority_color(r.majority.regions[i]);
    ppm.push_back(static_cast<char>(c.r));
    ppm.push_back(static_cast<char>(c.g));
    ppm.push_back(static_cast<char>(c.b));
  }
  write_file_atomic(dir / "region_majority.ppm", ppm);
}

}  // namespace apvqa
