#pragma once

// VQA sample records shared by the synthetic and COCO pipelines, dataset
// manifests, and their JSON encodings.

#include <apvqa/error.hpp>
#include <apvqa/geometry.hpp>
#include <apvqa/render.hpp>
#include <apvqa/rng.hpp>

#include <json.hpp>

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace apvqa {

using ojson = nlohmann::ordered_json;

inline constexpr std::string_view kGeneratorVersion = "apvqa-1.0";

struct BBox {
  double x = 0, y = 0, w = 0, h = 0;
  double center_x() const { return x + w / 2.0; }
  double center_y() const { return y + h / 2.0; }
  friend bool operator==(const BBox&, const BBox&) = default;
};

struct CocoInfo {
  std::int64_t image_id = 0;
  int category_id = 0;
  std::string category;
  BBox bbox;
  int width = 0;
  int height = 0;
  std::string source_split;
  friend bool operator==(const CocoInfo&, const CocoInfo&) = default;
};

using OptionOrder = std::array<PositionLabel, kNumLabels>;

struct VqaSample {
  std::string id;
  std::string image_path;
  std::string question;
  OptionOrder options = kAllLabels;
  PositionLabel gold = PositionLabel::Center;
  Cell target_cell{};
  Region target_region{};
  std::string tag;
  std::optional<StimulusSpec> stimulus;  // synthetic samples
  std::optional<CocoInfo> coco;          // COCO samples

  std::size_t distractor_count() const { return stimulus ? stimulus->distractors.size() : 0; }
  friend bool operator==(const VqaSample&, const VqaSample&) = default;
};

struct Dataset {
  std::string name;
  std::uint64_t seed = 0;
  std::vector<VqaSample> samples;
  ojson notes = ojson::object();  // generator-specific manifest fields (deficits, ratios, ...)
};

struct TrainValSplit {
  Dataset train;
  Dataset val;
};

// Option order for one sample, reproducible from (seed, id) alone.
inline OptionOrder shuffled_options(std::uint64_t seed, std::string_view sample_id) {
  OptionOrder opts = kAllLabels;
  Rng rng(derive_seed(seed, std::string("options:") + std::string(sample_id)));
  rng.shuffle(std::span<PositionLabel>(opts));
  return opts;
}

// ---------------------------------------------------------------------------
// JSON

inline ojson cell_json(Cell c) { return ojson::array({c.row, c.col}); }

inline Cell cell_from_json(const ojson& j) {
  if (!j.is_array() || j.size() != 2) throw InputError("cell must be [row, col]");
  Cell c{j[0].get<int>(), j[1].get<int>()};
  if (!is_valid(c)) throw InputError("cell out of range");
  return c;
}

inline ojson object_json(const ObjectSpec& o) {
  ojson j;
  j["shape"] = to_string(o.shape);
  j["color"] = to_string(o.color);
  j["size"] = to_string(o.size);
  j["cell"] = cell_json(o.cell);
  return j;
}

inline ObjectSpec object_from_json(const ojson& j) {
  return ObjectSpec{shape_from_string(j.at("shape").get<std::string>()),
                    color_from_string(j.at("color").get<std::string>()),
                    size_from_string(j.at("size").get<std::string>()), cell_from_json(j.at("cell"))};
}

inline PositionLabel label_from_json(const ojson& j) {
  const auto s = j.get<std::string>();
  if (auto l = label_from_string(s)) return *l;
  throw InputError("unknown position label: " + s);
}

inline ojson to_json(const VqaSample& s) {
  ojson j;
  j["id"] = s.id;
  j["image"] = s.image_path;
  j["question"] = s.question;
  ojson opts = ojson::array();
  for (auto l : s.options) opts.push_back(to_string(l));
  j["options"] = std::move(opts);
  j["gold"] = to_string(s.gold);
  j["target_cell"] = cell_json(s.target_cell);
  j["target_region"] = ojson::array({s.target_region.row, s.target_region.col});
  ojson meta;
  meta["tag"] = s.tag;
  if (s.stimulus) {
    meta["color"] = to_string(s.stimulus->target.color);
    meta["shape"] = to_string(s.stimulus->target.shape);
    meta["size"] = to_string(s.stimulus->target.size);
  }
  if (s.coco) meta["category"] = s.coco->category;
  meta["distractor_count"] = s.distractor_count();
  j["meta"] = std::move(meta);
  if (s.stimulus) {
    ojson d = ojson::array();
    for (const auto& o : s.stimulus->distractors) d.push_back(object_json(o));
    j["distractors"] = std::move(d);
    j["geometry"] = ojson::array({s.stimulus->geom.width, s.stimulus->geom.height});
  }
  if (s.coco) {
    ojson c;
    c["image_id"] = s.coco->image_id;
    c["category_id"] = s.coco->category_id;
    c["category"] = s.coco->category;
    c["bbox"] = ojson::array({s.coco->bbox.x, s.coco->bbox.y, s.coco->bbox.w, s.coco->bbox.h});
    c["width"] = s.coco->width;
    c["height"] = s.coco->height;
    c["source_split"] = s.coco->source_split;
    j["coco"] = std::move(c);
  }
  return j;
}

inline VqaSample sample_from_json(const ojson& j) {
  try {
    VqaSample s;
    s.id = j.at("id").get<std::string>();
    s.image_path = j.at("image").get<std::string>();
    s.question = j.at("question").get<std::string>();
    const auto& opts = j.at("options");
    if (!opts.is_array() || opts.size() != kNumLabels) throw InputError("options must list 9 labels");
    std::set<PositionLabel> seen;
    for (std::size_t i = 0; i < kNumLabels; ++i) {
      s.options[i] = label_from_json(opts[i]);
      seen.insert(s.options[i]);
    }
    if (seen.size() != kNumLabels) throw InputError("options are not a permutation of the labels");
    s.gold = label_from_json(j.at("gold"));
    s.target_cell = cell_from_json(j.at("target_cell"));
    const auto& r = j.at("target_region");
    s.target_region = Region{r.at(0).get<int>(), r.at(1).get<int>()};
    const auto& meta = j.at("meta");
    s.tag = meta.at("tag").get<std::string>();
    if (meta.contains("shape")) {
      StimulusSpec spec;
      spec.target = ObjectSpec{shape_from_string(meta.at("shape").get<std::string>()),
                               color_from_string(meta.at("color").get<std::string>()),
                               size_from_string(meta.at("size").get<std::string>()), s.target_cell};
      if (j.contains("distractors")) {
        for (const auto& d : j.at("distractors")) spec.distractors.push_back(object_from_json(d));
      }
      if (j.contains("geometry")) {
        spec.geom.width = j.at("geometry").at(0).get<int>();
        spec.geom.height = j.at("geometry").at(1).get<int>();
      }
      s.stimulus = std::move(spec);
    }
    if (j.contains("coco")) {
      const auto& c = j.at("coco");
      CocoInfo info;
      info.image_id = c.at("image_id").get<std::int64_t>();
      info.category_id = c.at("category_id").get<int>();
      info.category = c.at("category").get<std::string>();
      const auto& b = c.at("bbox");
      info.bbox = BBox{b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(),
                       b.at(3).get<double>()};
      info.width = c.at("width").get<int>();
      info.height = c.at("height").get<int>();
      info.source_split = c.at("source_split").get<std::string>();
      s.coco = std::move(info);
    }
    if (label_of(s.target_region) != s.gold) throw InputError("gold label disagrees with target_region");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed sample record: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Manifest

struct Counts {
  std::array<std::size_t, kNumCells> per_cell{};
  std::array<std::size_t, kNumLabels> per_label{};
};

inline Counts count_samples(const std::vector<VqaSample>& samples) {
  Counts c;
  for (const auto& s : samples) {
    ++c.per_cell[cell_index(s.target_cell)];
    ++c.per_label[index_of(s.gold)];
  }
  return c;
}

inline ojson manifest_json(const Dataset& d) {
  const Counts c = count_samples(d.samples);
  ojson j;
  j["name"] = d.name;
  j["generator_version"] = kGeneratorVersion;
  j["seed"] = d.seed;
  j["sample_count"] = d.samples.size();
  ojson grid = ojson::array();
  for (int r = 0; r < kCellsPerSide; ++r) {
    ojson row = ojson::array();
    for (int col = 0; col < kCellsPerSide; ++col) row.push_back(c.per_cell[cell_index({r, col})]);
    grid.push_back(std::move(row));
  }
  j["counts_per_cell"] = std::move(grid);
  ojson labels;
  for (int i = 0; i < kNumLabels; ++i) labels[std::string(kLabelNames[i])] = c.per_label[i];
  j["counts_per_label"] = std::move(labels);
  for (const auto& [k, v] : d.notes.items()) j[k] = v;
  return j;
}

// Checks ids are unique and, when a manifest is given, that its counts match
// a recount of the samples.
inline void validate_dataset(const Dataset& d, const ojson* manifest = nullptr) {
  std::set<std::string> ids;
  for (const auto& s : d.samples) {
    if (!ids.insert(s.id).second) throw InputError("duplicate sample id: " + s.id);
  }
  if (manifest) {
    const ojson expect = manifest_json(d);
    for (const char* key : {"sample_count", "counts_per_cell", "counts_per_label"}) {
      if (!manifest->contains(key) || manifest->at(key) != expect.at(key)) {
        throw InputError(std::string("manifest field '") + key + "' disagrees with samples");
      }
    }
  }
}

}  // namespace apvqa
