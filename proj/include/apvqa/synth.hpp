#pragma once

// Synthetic absolute-position datasets: the exhaustive evaluation set, the
// attribute-disjoint training set with its stratified split, distractor
// augmentation, and nested scaling subsets.

#include <apvqa/error.hpp>
#include <apvqa/geometry.hpp>
#include <apvqa/render.hpp>
#include <apvqa/rng.hpp>
#include <apvqa/sample.hpp>
#include <apvqa/dataset_io.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

namespace apvqa {

inline constexpr std::string_view kEvalTag = "synth-eval";
inline constexpr std::string_view kTrainTag = "synth-train";

inline std::string stimulus_key(const StimulusSpec& spec) {
  std::ostringstream os;
  const auto put = [&](const ObjectSpec& o) {
    os << to_string(o.shape) << ',' << to_string(o.color) << ',' << to_string(o.size) << ','
       << o.cell.row << ',' << o.cell.col;
  };
  os << "t:";
  put(spec.target);
  for (const auto& d : spec.distractors) {
    os << ";d:";
    put(d);
  }
  os << ";g:" << spec.geom.width << 'x' << spec.geom.height;
  return os.str();
}

inline std::string synthetic_question(const ObjectSpec& target) {
  return "Where is the " + std::string(to_string(target.color)) + " " +
         std::string(to_string(target.shape)) + "?";
}

inline VqaSample make_vqa_sample(const StimulusSpec& spec, std::string_view tag, std::uint64_t seed) {
  VqaSample s;
  s.tag = std::string(tag);
  s.id = s.tag + "-" + hex64(fnv1a64(s.tag + "|" + stimulus_key(spec)));
  s.image_path = synthetic_image_path(s.id);
  s.question = synthetic_question(spec.target);
  s.options = shuffled_options(seed, s.id);
  s.target_cell = spec.target.cell;
  s.target_region = region_of_cell(spec.target.cell);
  s.gold = label_of(s.target_region);
  s.stimulus = spec;
  return s;
}

inline Dataset build_eval_set(std::uint64_t seed) {
  Dataset d;
  d.name = std::string(kEvalTag);
  d.seed = seed;
  d.samples.reserve(kTargetColors.size() * kEvalShapes.size() * kSizes.size() * kNumCells);
  for (ColorName color : kTargetColors) {
    for (Shape shape : kEvalShapes) {
      for (SizeKind size : kSizes) {
        for (int c = 0; c < kNumCells; ++c) {
          StimulusSpec spec;
          spec.target = ObjectSpec{shape, color, size, cell_from_index(c)};
          d.samples.push_back(make_vqa_sample(spec, kEvalTag, seed));
        }
      }
    }
  }
  return d;
}

// Colored plusses plus white versions of the evaluation shapes; 20 per cell.
inline std::vector<VqaSample> train_pool(std::uint64_t seed) {
  std::vector<VqaSample> out;
  out.reserve(1620);
  const auto add = [&](Shape shape, ColorName color, SizeKind size) {
    for (int c = 0; c < kNumCells; ++c) {
      StimulusSpec spec;
      spec.target = ObjectSpec{shape, color, size, cell_from_index(c)};
      out.push_back(make_vqa_sample(spec, kTrainTag, seed));
    }
  };
  for (ColorName color : kTargetColors) {
    for (SizeKind size : kSizes) add(Shape::Plus, color, size);
  }
  for (Shape shape : kEvalShapes) {
    for (SizeKind size : kSizes) add(shape, ColorName::White, size);
  }
  return out;
}

inline constexpr int kValPerCell = 4;

// 80/20 split stratified by target cell: each cell keeps 16 train / 4 val.
inline TrainValSplit build_train_set(std::uint64_t seed) {
  const std::vector<VqaSample> pool = train_pool(seed);
  std::array<std::vector<const VqaSample*>, kNumCells> by_cell;
  for (const auto& s : pool) by_cell[cell_index(s.target_cell)].push_back(&s);

  std::unordered_set<std::string> val_ids;
  for (int c = 0; c < kNumCells; ++c) {
    auto& members = by_cell[c];
    std::sort(members.begin(), members.end(),
              [](const VqaSample* a, const VqaSample* b) { return a->id < b->id; });
    Rng rng(derive_seed(seed, "split:cell:" + std::to_string(c)));
    rng.shuffle(std::span<const VqaSample*>(members));
    for (int i = 0; i < kValPerCell && i < static_cast<int>(members.size()); ++i) {
      val_ids.insert(members[i]->id);
    }
  }
  TrainValSplit split;
  split.train.name = "synth-train";
  split.val.name = "synth-val";
  split.train.seed = split.val.seed = seed;
  for (const auto& s : pool) (val_ids.count(s.id) ? split.val : split.train).samples.push_back(s);
  split.train.notes["split"] = "train";
  split.val.notes["split"] = "val";
  return split;
}

// ---------------------------------------------------------------------------
// Distractors

struct DistractorOptions {
  int k = 1;
  bool allow_plus = false;   // let white targets receive plus-shaped distractors
  bool allow_any_k = false;  // accept k outside {1, 3, 5}
};

// White targets: white distractors of a different shape. Colored targets:
// same shape, different color.
inline ObjectSpec draw_distractor(const ObjectSpec& target, Cell cell, bool allow_plus, Rng& rng) {
  ObjectSpec d = target;
  d.cell = cell;
  if (target.color == ColorName::White) {
    std::vector<Shape> palette;
    for (Shape s : kEvalShapes) palette.push_back(s);
    if (allow_plus) palette.push_back(Shape::Plus);
    std::erase(palette, target.shape);
    d.shape = palette[rng.below(palette.size())];
  } else {
    std::vector<ColorName> palette(kTargetColors.begin(), kTargetColors.end());
    std::erase(palette, target.color);
    d.color = palette[rng.below(palette.size())];
  }
  return d;
}

inline Dataset add_distractors(const Dataset& d, const DistractorOptions& opt, std::uint64_t seed) {
  if (opt.k == 0) return d;
  if (!opt.allow_any_k && opt.k != 1 && opt.k != 3 && opt.k != 5) {
    throw ConfigError("distractor count must be 1, 3 or 5 (got " + std::to_string(opt.k) + ")");
  }
  if (opt.k < 0 || opt.k + 1 > kNumCells) {
    throw ConfigError("distractor count out of range: " + std::to_string(opt.k));
  }
  Dataset out;
  out.name = d.name + "+d" + std::to_string(opt.k);
  out.seed = seed;
  out.notes = d.notes;
  out.notes["distractors"] = opt.k;
  out.notes["distractor_plus_allowed"] = opt.allow_plus;
  out.notes["source_dataset"] = d.name;
  out.samples.reserve(d.samples.size());
  for (const auto& s : d.samples) {
    if (!s.stimulus) throw InputError("sample " + s.id + " has no synthetic stimulus");
    if (!s.stimulus->distractors.empty()) throw InputError("sample " + s.id + " already has distractors");
    StimulusSpec spec = *s.stimulus;
    Rng rng(derive_seed(seed, "distractors:" + std::to_string(opt.k) + ":" + s.id));
    std::vector<int> free_cells;
    for (int c = 0; c < kNumCells; ++c) {
      if (cell_from_index(c) != spec.target.cell) free_cells.push_back(c);
    }
    // Partial Fisher-Yates: the first k entries become a uniform draw without replacement.
    for (int i = 0; i < opt.k; ++i) {
      const auto j = i + static_cast<int>(rng.below(free_cells.size() - i));
      std::swap(free_cells[i], free_cells[j]);
      spec.distractors.push_back(
          draw_distractor(spec.target, cell_from_index(free_cells[i]), opt.allow_plus, rng));
    }
    out.samples.push_back(make_vqa_sample(spec, s.tag + "+d" + std::to_string(opt.k), seed));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scaling subsets

inline const std::vector<double>& default_scale_ladder() {
  static const std::vector<double> ladder = {1, 2, 5, 10, 25, 50, 100};
  return ladder;
}

inline std::size_t subset_size(double percent, std::size_t n) {
  return static_cast<std::size_t>(std::floor(percent * static_cast<double>(n) / 100.0 + 0.5));
}

inline std::string percent_label(double percent) {
  std::ostringstream os;
  os << percent;
  return os.str();
}

// Priority order over all samples such that every prefix is stratified by
// target cell (divisor-method apportionment). Prefixes of one order are
// nested by construction.
inline std::vector<std::size_t> stratified_order(const std::vector<VqaSample>& samples,
                                                 std::uint64_t seed) {
  std::array<std::vector<std::size_t>, kNumCells> strata;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    strata[cell_index(samples[i].target_cell)].push_back(i);
  }
  std::array<int, kNumCells> cell_rank{};
  {
    std::array<int, kNumCells> perm{};
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(derive_seed(seed, "scale:cells"));
    rng.shuffle(std::span<int>(perm));
    for (int r = 0; r < kNumCells; ++r) cell_rank[perm[r]] = r;
  }
  struct Entry {
    std::size_t index;
    std::size_t pos;   // position within stratum
    std::size_t size;  // stratum size
    int rank;
  };
  std::vector<Entry> entries;
  entries.reserve(samples.size());
  for (int c = 0; c < kNumCells; ++c) {
    auto& members = strata[c];
    std::sort(members.begin(), members.end(),
              [&](std::size_t a, std::size_t b) { return samples[a].id < samples[b].id; });
    Rng rng(derive_seed(seed, "scale:cell:" + std::to_string(c)));
    rng.shuffle(std::span<std::size_t>(members));
    for (std::size_t j = 0; j < members.size(); ++j) {
      entries.push_back({members[j], j, members.size(), cell_rank[c]});
    }
  }
  // Key (pos + 1/2) / size, compared exactly in integers.
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    const auto lhs = (2 * a.pos + 1) * b.size;
    const auto rhs = (2 * b.pos + 1) * a.size;
    if (lhs != rhs) return lhs < rhs;
    return a.rank < b.rank;
  });
  std::vector<std::size_t> order;
  order.reserve(entries.size());
  for (const auto& e : entries) order.push_back(e.index);
  return order;
}

inline std::vector<Dataset> scale_subsets(const Dataset& d, const std::vector<double>& percents,
                                          std::uint64_t seed) {
  for (double p : percents) {
    if (!(p > 0.0 && p <= 100.0)) throw ConfigError("fraction must lie in (0, 100]: " + percent_label(p));
    if (subset_size(p, d.samples.size()) == 0) {
      throw ConfigError("fraction " + percent_label(p) + "% of " + std::to_string(d.samples.size()) +
                        " samples yields an empty subset");
    }
  }
  const std::vector<std::size_t> order = stratified_order(d.samples, seed);
  std::vector<Dataset> out;
  for (double p : percents) {
    const std::size_t n = subset_size(p, d.samples.size());
    std::vector<char> keep(d.samples.size(), 0);
    for (std::size_t i = 0; i < n; ++i) keep[order[i]] = 1;
    Dataset sub;
    sub.name = d.name + "@" + percent_label(p) + "pct";
    sub.seed = seed;
    sub.notes = d.notes;
    sub.notes["source_dataset"] = d.name;
    sub.notes["fraction_percent"] = p;
    for (std::size_t i = 0; i < d.samples.size(); ++i) {
      if (keep[i]) sub.samples.push_back(d.samples[i]);
    }
    out.push_back(std::move(sub));
  }
  return out;
}

}  // namespace apvqa
