#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace apvqa;
using namespace apvqa::testing;

namespace {

const Dataset& eval_set() {
  static const Dataset d = build_eval_set(7);
  return d;
}

const TrainValSplit& train_set() {
  static const TrainValSplit s = build_train_set(7);
  return s;
}

std::set<std::pair<ColorName, Shape>> combos(const std::vector<VqaSample>& samples) {
  std::set<std::pair<ColorName, Shape>> out;
  for (const auto& s : samples) out.insert({s.stimulus->target.color, s.stimulus->target.shape});
  return out;
}

std::string dataset_fingerprint(const Dataset& d) {
  std::string text = manifest_json(d).dump();
  for (const auto& s : d.samples) text += to_json(s).dump() + "\n";
  return hex64(fnv1a64(text));
}

}  // namespace

TEST(MakeVqaSample, RedSquareAtCenter) {
  StimulusSpec spec;
  spec.target = {Shape::Square, ColorName::Red, SizeKind::Regular, {4, 4}};
  const VqaSample s = make_vqa_sample(spec, kEvalTag, 3);
  EXPECT_EQ(s.gold, PositionLabel::Center);
  EXPECT_EQ(s.question, "Where is the red square?");
  EXPECT_TRUE(std::is_permutation(s.options.begin(), s.options.end(), kAllLabels.begin()));
  EXPECT_EQ(make_vqa_sample(spec, kEvalTag, 3), s);
  EXPECT_EQ(make_vqa_sample(spec, kEvalTag, 3).options, s.options);
}

TEST(MakeVqaSample, WhiteIsSpoken) {
  StimulusSpec spec;
  spec.target = {Shape::Circle, ColorName::White, SizeKind::Small, {0, 8}};
  const VqaSample s = make_vqa_sample(spec, kTrainTag, 0);
  EXPECT_EQ(s.question, "Where is the white circle?");
  EXPECT_EQ(s.gold, PositionLabel::TopRight);
}

TEST(MakeVqaSample, IdDependsOnContentAndTagOnly) {
  StimulusSpec spec;
  spec.target = {Shape::Star, ColorName::Cyan, SizeKind::Regular, {2, 5}};
  EXPECT_EQ(make_vqa_sample(spec, kEvalTag, 1).id, make_vqa_sample(spec, kEvalTag, 2).id);
  EXPECT_NE(make_vqa_sample(spec, kEvalTag, 1).id, make_vqa_sample(spec, kTrainTag, 1).id);
  StimulusSpec other = spec;
  other.target.size = SizeKind::Small;
  EXPECT_NE(make_vqa_sample(spec, kEvalTag, 1).id, make_vqa_sample(other, kEvalTag, 1).id);
}

TEST(EvalSet, Cardinalities) {
  const Dataset& d = eval_set();
  EXPECT_EQ(d.samples.size(), 3888u);
  const Counts c = count_samples(d.samples);
  for (auto n : c.per_cell) EXPECT_EQ(n, 48u);
  for (auto n : c.per_label) EXPECT_EQ(n, 432u);
  std::set<std::tuple<ColorName, Shape, SizeKind, Cell>> seen;
  for (const auto& s : d.samples) {
    const auto& t = s.stimulus->target;
    EXPECT_TRUE(seen.insert({t.color, t.shape, t.size, t.cell}).second);
  }
}

TEST(EvalSet, SampleInvariants) {
  std::set<std::string> ids;
  for (const auto& s : eval_set().samples) {
    EXPECT_TRUE(ids.insert(s.id).second);
    EXPECT_TRUE(std::is_permutation(s.options.begin(), s.options.end(), kAllLabels.begin()));
    EXPECT_EQ(s.gold, label_of(s.target_region));
    EXPECT_EQ(s.target_region, region_of_cell(s.target_cell));
    EXPECT_NE(s.question.find(std::string(to_string(s.stimulus->target.color)) + " " +
                              std::string(to_string(s.stimulus->target.shape))),
              std::string::npos);
  }
  EXPECT_NO_THROW(validate_dataset(eval_set()));
}

TEST(EvalSet, GoldIndexRoughlyUniform) {
  std::array<int, 9> at_index{};
  for (const auto& s : eval_set().samples) {
    ++at_index[std::find(s.options.begin(), s.options.end(), s.gold) - s.options.begin()];
  }
  for (int n : at_index) EXPECT_NEAR(n, 432, 60);
}

TEST(EvalSet, DeterministicAndSeedSensitive) {
  EXPECT_EQ(dataset_fingerprint(build_eval_set(7)), dataset_fingerprint(eval_set()));
  EXPECT_NE(dataset_fingerprint(build_eval_set(8)), dataset_fingerprint(eval_set()));
}

TEST(TrainSet, CardinalitiesAndSplit) {
  const auto& s = train_set();
  EXPECT_EQ(s.train.samples.size() + s.val.samples.size(), 1620u);
  EXPECT_EQ(s.train.samples.size(), 1296u);
  EXPECT_EQ(s.val.samples.size(), 324u);
  std::size_t plus = 0, white = 0;
  for (const auto* part : {&s.train, &s.val}) {
    for (const auto& x : part->samples) {
      plus += x.stimulus->target.shape == Shape::Plus;
      white += x.stimulus->target.color == ColorName::White;
    }
  }
  EXPECT_EQ(plus, 972u);
  EXPECT_EQ(white, 648u);
  const Counts tc = count_samples(s.train.samples);
  const Counts vc = count_samples(s.val.samples);
  for (int c = 0; c < kNumCells; ++c) {
    EXPECT_EQ(tc.per_cell[c], 16u);
    EXPECT_EQ(vc.per_cell[c], 4u);
  }
  std::set<std::string> train_ids;
  for (const auto& x : s.train.samples) train_ids.insert(x.id);
  for (const auto& x : s.val.samples) EXPECT_FALSE(train_ids.count(x.id));
}

TEST(TrainSet, DisjointFromEvalCombos) {
  auto train = combos(train_set().train.samples);
  for (const auto& c : combos(train_set().val.samples)) train.insert(c);
  const auto eval = combos(eval_set().samples);
  EXPECT_EQ(train.size(), 10u);
  EXPECT_EQ(eval.size(), 24u);
  for (const auto& c : train) EXPECT_FALSE(eval.count(c));
}

TEST(Distractors, LegalityForAllK) {
  for (int k : {1, 3, 5}) {
    const Dataset aug = add_distractors(train_set().train, {k}, 11);
    ASSERT_EQ(aug.samples.size(), train_set().train.samples.size());
    for (const auto& s : aug.samples) {
      const auto& spec = *s.stimulus;
      ASSERT_EQ(spec.distractors.size(), static_cast<std::size_t>(k));
      std::set<Cell> cells{spec.target.cell};
      for (const auto& o : spec.distractors) {
        EXPECT_TRUE(cells.insert(o.cell).second);
        EXPECT_EQ(o.size, spec.target.size);
        if (spec.target.color == ColorName::White) {
          EXPECT_EQ(o.color, ColorName::White);
          EXPECT_NE(o.shape, spec.target.shape);
          EXPECT_NE(o.shape, Shape::Plus);
        } else {
          EXPECT_EQ(o.shape, spec.target.shape);
          EXPECT_NE(o.color, spec.target.color);
          EXPECT_NE(o.color, ColorName::White);
        }
      }
      EXPECT_EQ(s.gold, label_of(region_of_cell(spec.target.cell)));
      EXPECT_EQ(s.distractor_count(), static_cast<std::size_t>(k));
    }
  }
}

TEST(Distractors, WhiteStarPaletteEnumeration) {
  StimulusSpec spec;
  spec.target = {Shape::Star, ColorName::White, SizeKind::Regular, {3, 3}};
  Dataset d;
  d.name = "one";
  d.samples.push_back(make_vqa_sample(spec, kTrainTag, 0));
  std::set<Shape> seen;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    seen.insert(add_distractors(d, {1}, seed).samples[0].stimulus->distractors[0].shape);
  }
  EXPECT_EQ(seen, (std::set<Shape>{Shape::Circle, Shape::Triangle, Shape::Square}));
  std::set<Shape> with_plus;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    with_plus.insert(add_distractors(d, {1, true}, seed).samples[0].stimulus->distractors[0].shape);
  }
  EXPECT_EQ(with_plus, (std::set<Shape>{Shape::Circle, Shape::Triangle, Shape::Square, Shape::Plus}));
}

TEST(Distractors, ReproducibleAndSeedSensitive) {
  const Dataset a = add_distractors(train_set().train, {3}, 5);
  const Dataset b = add_distractors(train_set().train, {3}, 5);
  const Dataset c = add_distractors(train_set().train, {3}, 6);
  EXPECT_EQ(dataset_fingerprint(a), dataset_fingerprint(b));
  EXPECT_NE(dataset_fingerprint(a), dataset_fingerprint(c));
}

TEST(Distractors, KValidation) {
  const Dataset& d = train_set().val;
  EXPECT_THROW(add_distractors(d, {2}, 0), ConfigError);
  EXPECT_THROW(add_distractors(d, {-1, false, true}, 0), ConfigError);
  EXPECT_THROW(add_distractors(d, {81, false, true}, 0), ConfigError);
  EXPECT_EQ(add_distractors(d, {2, false, true}, 0).samples.front().stimulus->distractors.size(), 2u);
  EXPECT_EQ(add_distractors(d, {80, false, true}, 0).samples.front().stimulus->distractors.size(), 80u);
  const Dataset same = add_distractors(d, {0}, 0);
  EXPECT_EQ(same.samples, d.samples);
  EXPECT_EQ(same.name, d.name);
}

TEST(Distractors, RejectsAlreadyAugmented) {
  const Dataset once = add_distractors(train_set().val, {1}, 0);
  EXPECT_THROW(add_distractors(once, {1}, 0), InputError);
}

TEST(ScaleSubsets, TenPercentOf1296) {
  const auto subs = scale_subsets(train_set().train, {10}, 3);
  const std::size_t n = subs[0].samples.size();
  EXPECT_TRUE(n == 129 || n == 130) << n;
  EXPECT_EQ(n, subset_size(10, 1296));
  // Per-cell counts differ by at most one.
  const Counts c = count_samples(subs[0].samples);
  const auto [lo, hi] = std::minmax_element(c.per_cell.begin(), c.per_cell.end());
  EXPECT_LE(*hi - *lo, 1u);
}

TEST(ScaleSubsets, LadderIsNestedBalancedAndOrdered) {
  const Dataset& d = train_set().train;
  const auto subs = scale_subsets(d, default_scale_ladder(), 9);
  ASSERT_EQ(subs.size(), default_scale_ladder().size());
  std::map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < d.samples.size(); ++i) position[d.samples[i].id] = i;
  for (std::size_t i = 0; i < subs.size(); ++i) {
    EXPECT_EQ(subs[i].samples.size(), subset_size(default_scale_ladder()[i], d.samples.size()));
    const Counts c = count_samples(subs[i].samples);
    const auto [lo, hi] = std::minmax_element(c.per_cell.begin(), c.per_cell.end());
    EXPECT_LE(*hi - *lo, 1u);
    for (std::size_t j = 1; j < subs[i].samples.size(); ++j) {
      EXPECT_LT(position[subs[i].samples[j - 1].id], position[subs[i].samples[j].id]);
    }
    if (i == 0) continue;
    std::set<std::string> larger;
    for (const auto& s : subs[i].samples) larger.insert(s.id);
    for (const auto& s : subs[i - 1].samples) EXPECT_TRUE(larger.count(s.id));
  }
  EXPECT_EQ(subs.back().samples, d.samples);
}

TEST(ScaleSubsets, NestedForEveryPrefixSize) {
  // Nestedness must hold between any two percentages, not only the default ladder.
  const Dataset& d = train_set().val;
  std::vector<double> percents;
  for (int p = 1; p <= 100; ++p) percents.push_back(p);
  const auto subs = scale_subsets(d, percents, 4);
  for (std::size_t i = 1; i < subs.size(); ++i) {
    std::set<std::string> larger;
    for (const auto& s : subs[i].samples) larger.insert(s.id);
    for (const auto& s : subs[i - 1].samples) ASSERT_TRUE(larger.count(s.id)) << percents[i];
  }
}

TEST(ScaleSubsets, Errors) {
  EXPECT_THROW(scale_subsets(train_set().val, {0}, 0), ConfigError);
  EXPECT_THROW(scale_subsets(train_set().val, {101}, 0), ConfigError);
  EXPECT_THROW(scale_subsets(train_set().val, {0.1}, 0), ConfigError);
}

TEST(DatasetIo, RoundTripWithoutImages) {
  TempDir dir("synth_io");
  const Dataset d = add_distractors(train_set().val, {3}, 2);
  write_dataset(d, dir.path, {false});
  const Dataset back = read_dataset(dir.path);
  EXPECT_EQ(back.samples, d.samples);
  EXPECT_EQ(back.name, d.name);
  EXPECT_EQ(back.seed, d.seed);
  EXPECT_EQ(back.notes, d.notes);
}

TEST(DatasetIo, ManifestMismatchIsInputError) {
  TempDir dir("synth_io_bad");
  write_dataset(train_set().val, dir.path, {false});
  auto m = read_json_file(dir.path / "manifest.json");
  m["sample_count"] = 1;
  write_json_file(dir.path / "manifest.json", m);
  EXPECT_THROW(read_dataset(dir.path), InputError);
}

TEST(DatasetIo, ParallelRenderMatchesSerial) {
  TempDir a("synth_par_a");
  TempDir b("synth_par_b");
  Dataset d = train_set().val;
  d.samples.resize(12);
  write_dataset(d, a.path, {true, 1});
  write_dataset(d, b.path, {true, 4});
  for (const auto& s : d.samples) {
    EXPECT_EQ(read_file(a.path / s.image_path), read_file(b.path / s.image_path));
    EXPECT_EQ(decode_image(a.path / s.image_path), render_scene(*s.stimulus));
  }
}
