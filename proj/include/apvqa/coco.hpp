#pragma once

// COCO-derived absolute-position datasets: annotation ingest, single-instance
// sample construction, image-disjoint train/val split and the region- and
// category-balanced subset.

#include <apvqa/error.hpp>
#include <apvqa/geometry.hpp>
#include <apvqa/png_io.hpp>
#include <apvqa/rng.hpp>
#include <apvqa/sample.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace apvqa {

struct CocoImage {
  std::int64_t id = 0;
  std::string file_name;
  int width = 0;
  int height = 0;
};

struct CocoInstance {
  int category_id = 0;
  BBox bbox;
  bool crowd = false;
};

struct IngestWarnings {
  std::size_t images_missing_dims = 0;
  std::size_t unknown_image_refs = 0;
  std::size_t unknown_categories = 0;
  std::size_t malformed_annotations = 0;
  std::size_t clamped_bboxes = 0;

  std::size_t total() const {
    return images_missing_dims + unknown_image_refs + unknown_categories + malformed_annotations +
           clamped_bboxes;
  }
};

struct AnnotationIndex {
  std::map<std::int64_t, CocoImage> images;
  std::map<std::int64_t, std::vector<CocoInstance>> instances;  // keyed by image id
  std::map<int, std::string> categories;
  IngestWarnings warnings;

  std::size_t instance_count() const {
    std::size_t n = 0;
    for (const auto& [_, v] : instances) n += v.size();
    return n;
  }
};

namespace detail {

inline AnnotationIndex index_from_json(const nlohmann::json& root) {
  if (!root.is_object()) throw InputError("COCO annotation root must be an object");
  AnnotationIndex idx;
  const auto num = [](const nlohmann::json& j, const char* key) -> const nlohmann::json* {
    auto it = j.find(key);
    return (it != j.end() && it->is_number()) ? &*it : nullptr;
  };
  if (auto it = root.find("categories"); it != root.end() && it->is_array()) {
    for (const auto& c : *it) {
      if (!c.is_object() || !num(c, "id") || !c.contains("name")) continue;
      idx.categories[c["id"].get<int>()] = c["name"].get<std::string>();
    }
  }
  if (auto it = root.find("images"); it != root.end() && it->is_array()) {
    for (const auto& im : *it) {
      if (!im.is_object() || !num(im, "id")) {
        ++idx.warnings.images_missing_dims;
        continue;
      }
      const auto* w = num(im, "width");
      const auto* h = num(im, "height");
      if (!w || !h || w->get<int>() <= 0 || h->get<int>() <= 0) {
        ++idx.warnings.images_missing_dims;
        continue;
      }
      CocoImage img;
      img.id = im["id"].get<std::int64_t>();
      img.file_name = im.value("file_name", std::string());
      img.width = w->get<int>();
      img.height = h->get<int>();
      idx.images[img.id] = std::move(img);
    }
  } else {
    throw InputError("COCO annotation file has no 'images' array");
  }
  if (auto it = root.find("annotations"); it != root.end() && it->is_array()) {
    for (const auto& a : *it) {
      const auto* image_id = a.is_object() ? num(a, "image_id") : nullptr;
      const auto* category_id = a.is_object() ? num(a, "category_id") : nullptr;
      auto bb = a.is_object() ? a.find("bbox") : a.end();
      if (!image_id || !category_id || bb == a.end() || !bb->is_array() || bb->size() != 4) {
        ++idx.warnings.malformed_annotations;
        continue;
      }
      const auto img_it = idx.images.find(image_id->get<std::int64_t>());
      if (img_it == idx.images.end()) {
        ++idx.warnings.unknown_image_refs;
        continue;
      }
      const int cat = category_id->get<int>();
      if (!idx.categories.count(cat)) {
        ++idx.warnings.unknown_categories;
        continue;
      }
      const CocoImage& img = img_it->second;
      const double x = (*bb)[0].get<double>(), y = (*bb)[1].get<double>();
      const double w = (*bb)[2].get<double>(), h = (*bb)[3].get<double>();
      const double x0 = std::clamp(x, 0.0, double(img.width));
      const double y0 = std::clamp(y, 0.0, double(img.height));
      const double x1 = std::clamp(x + std::max(w, 0.0), 0.0, double(img.width));
      const double y1 = std::clamp(y + std::max(h, 0.0), 0.0, double(img.height));
      CocoInstance inst;
      inst.category_id = cat;
      inst.bbox = BBox{x0, y0, x1 - x0, y1 - y0};
      if (inst.bbox != BBox{x, y, w, h}) ++idx.warnings.clamped_bboxes;
      inst.crowd = a.value("iscrowd", 0) != 0;
      idx.instances[img.id].push_back(inst);
    }
  }
  return idx;
}

// Segmentation polygons/RLE dominate COCO files and are never used here.
inline bool drop_segmentation(int /*depth*/, nlohmann::json::parse_event_t event,
                              nlohmann::json& parsed) {
  return !(event == nlohmann::json::parse_event_t::key && parsed == "segmentation");
}

}  // namespace detail

inline AnnotationIndex ingest_annotations_text(std::string_view text) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(text.begin(), text.end(), detail::drop_segmentation);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError("annotation parse error at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  return detail::index_from_json(root);
}

inline AnnotationIndex ingest_annotations(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open annotation file: " + path.string());
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(in, detail::drop_segmentation);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(path.string() + ": parse error at byte " + std::to_string(e.byte) + ": " +
                     e.what());
  }
  return detail::index_from_json(root);
}

inline std::string coco_sample_id(std::int64_t image_id, int category_id) {
  return "coco-" + std::to_string(image_id) + "-" + std::to_string(category_id);
}

// One sample per (image, category) where that category has exactly one
// instance in the image. Crowd regions count as instances.
inline Dataset build_coco_set(const AnnotationIndex& idx, std::uint64_t seed,
                              std::string_view split = "train") {
  Dataset d;
  d.name = "coco-" + std::string(split);
  d.seed = seed;
  for (const auto& [image_id, instances] : idx.instances) {
    const CocoImage& img = idx.images.at(image_id);
    std::map<int, std::vector<const CocoInstance*>> by_category;
    for (const auto& inst : instances) by_category[inst.category_id].push_back(&inst);
    const ImageGeometry geom{img.width, img.height, kCellsPerSide, kRegionsPerSide};
    for (const auto& [category_id, members] : by_category) {
      if (members.size() != 1) continue;
      const CocoInstance& inst = *members.front();
      VqaSample s;
      s.id = coco_sample_id(image_id, category_id);
      s.tag = "coco-" + std::string(split);
      s.image_path = img.file_name;
      const std::string& category = idx.categories.at(category_id);
      s.question = "Where is the " + category + "?";
      s.options = shuffled_options(seed, s.id);
      const double cx = inst.bbox.center_x(), cy = inst.bbox.center_y();
      s.target_region = region_of_point(cx, cy, geom);
      s.target_cell = cell_of_point(cx, cy, geom);
      s.gold = label_of(s.target_region);
      s.coco = CocoInfo{image_id, category_id, category, inst.bbox, img.width, img.height,
                        std::string(split)};
      d.samples.push_back(std::move(s));
    }
  }
  d.notes["source_split"] = std::string(split);
  d.notes["images_with_questions"] = [&] {
    std::size_t n = 0;
    std::int64_t last = -1;
    bool first = true;
    for (const auto& s : d.samples) {
      if (first || s.coco->image_id != last) ++n;
      first = false;
      last = s.coco->image_id;
    }
    return n;
  }();
  return d;
}

inline std::string image_key(const VqaSample& s) {
  return s.coco ? std::to_string(s.coco->image_id) : s.image_path;
}

// Image-disjoint split: every question of an image lands on the same side.
// Images are visited in a seeded order and fill the train side until it
// holds round((1 - val_fraction) * n) questions.
inline TrainValSplit split_train_val(const Dataset& d, double val_fraction, std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw ConfigError("validation fraction must lie in (0, 1)");
  }
  std::map<std::string, std::vector<std::size_t>> by_image;
  for (std::size_t i = 0; i < d.samples.size(); ++i) by_image[image_key(d.samples[i])].push_back(i);
  std::vector<const std::string*> keys;
  for (const auto& [k, _] : by_image) keys.push_back(&k);
  Rng rng(derive_seed(seed, "coco:split"));
  rng.shuffle(std::span<const std::string*>(keys));

  const auto target = static_cast<std::size_t>(
      std::llround((1.0 - val_fraction) * static_cast<double>(d.samples.size())));
  std::vector<char> is_train(d.samples.size(), 0);
  std::size_t train_count = 0;
  for (const std::string* k : keys) {
    if (train_count >= target) break;
    for (std::size_t i : by_image[*k]) is_train[i] = 1;
    train_count += by_image[*k].size();
  }
  TrainValSplit out;
  out.train.name = d.name + "/train";
  out.val.name = d.name + "/val";
  out.train.seed = out.val.seed = seed;
  out.train.notes = out.val.notes = d.notes;
  out.train.notes["split"] = "train";
  out.val.notes["split"] = "val";
  out.train.notes["val_fraction"] = out.val.notes["val_fraction"] = val_fraction;
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    (is_train[i] ? out.train : out.val).samples.push_back(d.samples[i]);
  }
  return out;
}

struct RegionQuota {
  std::size_t quota = 0;
  std::size_t selected = 0;
  std::size_t deficit() const { return quota - selected; }
};

inline std::string category_of(const VqaSample& s) {
  return s.coco ? s.coco->category : s.question;
}

// n/9 samples per region (the first n % 9 regions in label order take one
// extra). Within a region, categories are visited round-robin in ascending
// order of availability then name, so as many distinct categories as
// possible are represented. Regions short of supply contribute everything
// they have and the shortfall is recorded in the manifest notes.
inline Dataset balanced_subset(const Dataset& d, std::size_t n, std::uint64_t seed) {
  if (n > d.samples.size()) {
    throw ConfigError("requested " + std::to_string(n) + " samples from a dataset of " +
                      std::to_string(d.samples.size()));
  }
  std::array<std::map<std::string, std::vector<std::size_t>>, kNumLabels> pools;
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    pools[index_of(d.samples[i].gold)][category_of(d.samples[i])].push_back(i);
  }
  std::array<RegionQuota, kNumLabels> quotas{};
  std::vector<char> keep(d.samples.size(), 0);
  for (int r = 0; r < kNumLabels; ++r) {
    quotas[r].quota = n / kNumLabels + (static_cast<std::size_t>(r) < n % kNumLabels ? 1 : 0);
    struct Bucket {
      const std::string* category;
      std::vector<std::size_t> members;
      std::size_t next = 0;
    };
    std::vector<Bucket> buckets;
    for (auto& [category, members] : pools[r]) {
      Bucket b{&category, members};
      std::sort(b.members.begin(), b.members.end(),
                [&](std::size_t a, std::size_t c) { return d.samples[a].id < d.samples[c].id; });
      Rng rng(derive_seed(seed, "balanced:" + std::to_string(r) + ":" + category));
      rng.shuffle(std::span<std::size_t>(b.members));
      buckets.push_back(std::move(b));
    }
    std::stable_sort(buckets.begin(), buckets.end(), [](const Bucket& a, const Bucket& b) {
      if (a.members.size() != b.members.size()) return a.members.size() < b.members.size();
      return *a.category < *b.category;
    });
    std::size_t taken = 0;
    bool progress = true;
    while (taken < quotas[r].quota && progress) {
      progress = false;
      for (auto& b : buckets) {
        if (taken == quotas[r].quota) break;
        if (b.next < b.members.size()) {
          keep[b.members[b.next++]] = 1;
          ++taken;
          progress = true;
        }
      }
    }
    quotas[r].selected = taken;
  }
  Dataset out;
  out.name = d.name + "/balanced" + std::to_string(n);
  out.seed = seed;
  out.notes = d.notes;
  out.notes["source_dataset"] = d.name;
  out.notes["requested"] = n;
  ojson deficits;
  std::size_t total_deficit = 0;
  for (int r = 0; r < kNumLabels; ++r) {
    deficits[std::string(kLabelNames[r])] = quotas[r].deficit();
    total_deficit += quotas[r].deficit();
  }
  out.notes["region_deficit"] = std::move(deficits);
  out.notes["total_deficit"] = total_deficit;
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    if (keep[i]) out.samples.push_back(d.samples[i]);
  }
  return out;
}

}  // namespace apvqa
