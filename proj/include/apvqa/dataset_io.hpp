#pragma once

// Dataset directory layout:
//   manifest.json   counts, seed, generator version
//   samples.jsonl   one VqaSample per line, fixed key order
//   images/<id>.png synthetic stimuli

#include <apvqa/error.hpp>
#include <apvqa/parallel.hpp>
#include <apvqa/png_io.hpp>
#include <apvqa/render.hpp>
#include <apvqa/sample.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

namespace apvqa {

struct WriteOptions {
  bool render_images = true;
  unsigned jobs = 1;
  // When set, existing images are copied from this dataset directory instead of re-rendered.
  std::optional<fs::path> image_source;
};

inline std::string synthetic_image_path(std::string_view id) {
  return "images/" + std::string(id) + ".png";
}

inline void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory: " + dir.string());
}

inline void write_json_file(const fs::path& path, const ojson& j) {
  write_file_atomic(path, j.dump(2) + "\n");
}

inline ojson read_json_file(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return ojson::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(path.string() + ": parse error at byte " + std::to_string(e.byte) + ": " +
                     e.what());
  }
}

inline void write_dataset(const Dataset& d, const fs::path& dir, const WriteOptions& opt = {}) {
  validate_dataset(d);
  ensure_directory(dir);
  std::string lines;
  for (const auto& s : d.samples) lines += to_json(s).dump() + "\n";
  write_file_atomic(dir / "samples.jsonl", lines);
  write_json_file(dir / "manifest.json", manifest_json(d));

  std::vector<const VqaSample*> synthetic;
  for (const auto& s : d.samples) {
    if (s.stimulus) synthetic.push_back(&s);
  }
  if (synthetic.empty()) return;
  if (!opt.render_images && !opt.image_source) return;
  ensure_directory(dir / "images");
  parallel_for(synthetic.size(), opt.jobs, [&](std::size_t i) {
    const VqaSample& s = *synthetic[i];
    const fs::path dst = dir / s.image_path;
    if (opt.image_source) {
      const fs::path src = *opt.image_source / s.image_path;
      if (fs::exists(src)) {
        write_file_atomic(dst, read_file(src));
        return;
      }
      if (!opt.render_images) return;
    }
    encode_image(render_scene(*s.stimulus), dst);
  });
}

inline Dataset read_dataset(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  const fs::path samples_path = dir / "samples.jsonl";
  if (!fs::exists(manifest_path) || !fs::exists(samples_path)) {
    throw InputError("not a dataset directory (manifest.json/samples.jsonl missing): " + dir.string());
  }
  const ojson manifest = read_json_file(manifest_path);
  Dataset d;
  try {
    d.name = manifest.at("name").get<std::string>();
    d.seed = manifest.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed manifest: " + std::string(e.what()));
  }
  for (const auto& [k, v] : manifest.items()) {
    if (k == "name" || k == "seed" || k == "generator_version" || k == "sample_count" ||
        k == "counts_per_cell" || k == "counts_per_label") {
      continue;
    }
    d.notes[k] = v;
  }
  std::istringstream in(read_file(samples_path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      d.samples.push_back(sample_from_json(ojson::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw InputError(samples_path.string() + ":" + std::to_string(line_no) + ": parse error at byte " +
                       std::to_string(e.byte));
    } catch (const InputError& e) {
      throw InputError(samples_path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  validate_dataset(d, &manifest);
  return d;
}

}  // namespace apvqa
