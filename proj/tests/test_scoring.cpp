#include <gtest/gtest.h>

#include <filesystem>
#include <numeric>

#include "fmd/datagen.hpp"
#include "fmd/error.hpp"
#include "fmd/filters.hpp"
#include "fmd/scoring.hpp"

using namespace fmd;

namespace {

PredictionVector pv(std::vector<std::pair<int, double>> e) { return PredictionVector{std::move(e)}; }

}  // namespace

TEST(TopK, UniformTiesByClassId) {
  const auto v = top_k(std::vector<double>(10, 0.1), 5);
  ASSERT_EQ(v.k(), 5u);
  for (int i = 0; i < 5; ++i) {
    EXPECT_EQ(v.entries[i].first, i);
    EXPECT_EQ(v.entries[i].second, 0.1);
  }
}

TEST(TopK, OneHot) {
  std::vector<double> p(10, 0.0);
  p[7] = 1.0;
  const auto v = top_k(p, 5);
  EXPECT_EQ(v.entries[0], (std::pair<int, double>{7, 1.0}));
  for (int i = 1; i < 5; ++i) {
    EXPECT_EQ(v.entries[i].first, i - 1);
    EXPECT_EQ(v.entries[i].second, 0.0);
  }
}

TEST(TopK, FullIsSortedPermutation) {
  const std::vector<double> p{0.05, 0.2, 0.05, 0.1, 0.3, 0.02, 0.08, 0.1, 0.05, 0.05};
  const auto v = top_k(p, 10);
  double sum = 0.0;
  for (std::size_t i = 0; i < 10; ++i) {
    sum += v.entries[i].second;
    if (i > 0) {
      EXPECT_GE(v.entries[i - 1].second, v.entries[i].second);
      if (v.entries[i - 1].second == v.entries[i].second)
        EXPECT_LT(v.entries[i - 1].first, v.entries[i].first);
    }
  }
  EXPECT_NEAR(sum, 1.0, 1e-12);
  EXPECT_THROW(top_k(p, 0), Error);
  EXPECT_THROW(top_k(p, 11), Error);
}

TEST(FmdScore, HandExample) {
  const auto orig = pv({{1, 0.5}, {2, 0.2}, {3, 0.1}, {4, 0.1}, {5, 0.05}});
  const auto den = pv({{1, 0.4}, {2, 0.3}, {3, 0.1}, {4, 0.1}, {6, 0.05}});
  EXPECT_NEAR(fmd_score(orig, den, Norm::l1), 0.06, 1e-12);
  EXPECT_EQ(fmd_score(orig, orig, Norm::l1), 0.0);
  EXPECT_EQ(fmd_score(orig, orig, Norm::l2), 0.0);
  // L2 over the same union: sqrt(0.01 + 0.01 + 0.0025 + 0.0025) / 5
  EXPECT_NEAR(fmd_score(orig, den, Norm::l2), std::sqrt(0.025) / 5.0, 1e-12);
  // orig-only drops class 6: (0.1 + 0.1 + 0.05) / 5
  EXPECT_NEAR(fmd_score(orig, den, Norm::l1, Alignment::orig_only), 0.05, 1e-12);
}

TEST(FmdScore, DisjointSets) {
  const auto a = pv({{0, 0.6}, {1, 0.3}});
  const auto b = pv({{2, 0.5}, {3, 0.4}});
  EXPECT_NEAR(fmd_score(a, b), (0.9 + 0.9) / 2.0, 1e-12);
  EXPECT_THROW(fmd_score(a, pv({{0, 1.0}})), Error);
}

TEST(Names, ParseRoundTrip) {
  for (Norm n : {Norm::l1, Norm::l2}) EXPECT_EQ(parse_norm(norm_name(n)), n);
  for (Alignment a : {Alignment::union_set, Alignment::orig_only})
    EXPECT_EQ(parse_alignment(alignment_name(a)), a);
  for (AttackTag t : {AttackTag::clean, AttackTag::fgsm, AttackTag::bim})
    EXPECT_EQ(parse_attack_tag(attack_tag_name(t)), t);
  for (FilterTag f : {FilterTag::median, FilterTag::wiener})
    EXPECT_EQ(parse_filter_tag(filter_tag_name(f)), f);
  EXPECT_THROW(parse_norm("linf"), Error);
  EXPECT_THROW(parse_filter_tag("gauss"), Error);
}

TEST(Denoise, WienerPathIsGrayReplicated) {
  DatasetSpec spec;
  spec.per_class = 1;
  const Image img = generate(spec)[3].image;
  const Image out = denoise_for_model(img, FilterTag::wiener, {});
  ASSERT_EQ(out.channels(), 3);
  const Image expect = replicate_gray(wiener_adaptive(to_grayscale(img), 5));
  EXPECT_EQ(out, expect);
  EXPECT_EQ(denoise_for_model(img, FilterTag::median, {}), median_filter(img, 3));
}

TEST(ScoreDataset, BookkeepingAndConstantImage) {
  const Network net(ModelParams::he_uniform(1));
  DatasetSpec spec;
  spec.per_class = 1;
  const Dataset d = generate(spec);
  const Image flat(32, 32, 3, 0.5);  // both filters leave it unchanged
  std::vector<ScoreInput> inputs{{"clean/a", &d[0].image, AttackTag::clean},
                                 {"fgsm/b", &d[1].image, AttackTag::fgsm},
                                 {"bim/c", &d[2].image, AttackTag::bim},
                                 {"clean/flat", &flat, AttackTag::clean}};
  for (FilterTag f : {FilterTag::median, FilterTag::wiener}) {
    const auto recs = score_dataset(net, inputs, f, {});
    ASSERT_EQ(recs.size(), 4u);
    EXPECT_EQ(recs[0].label, 0);
    EXPECT_EQ(recs[1].label, 1);
    EXPECT_EQ(recs[2].attack, AttackTag::bim);
    EXPECT_EQ(recs[1].image_id, "fgsm/b");
    EXPECT_EQ(recs[0].filter, f);
    EXPECT_LE(recs[3].score, 1e-9);
    for (const auto& r : recs) EXPECT_GE(r.score, 0.0);
  }
}

TEST(ScoresCsv, RoundTripAndErrors) {
  std::vector<ScoreRecord> recs{{"clean/x", 0.125, 0, AttackTag::clean, FilterTag::median},
                                {"bim/y", 0.0625, 1, AttackTag::bim, FilterTag::wiener}};
  const std::string text = format_scores_csv(recs);
  EXPECT_EQ(text.substr(0, text.find('\n')), "image_id,attack,filter,score,label");
  EXPECT_EQ(parse_scores_csv(text), recs);
  EXPECT_THROW(parse_scores_csv("nope\n"), Error);
  EXPECT_THROW(parse_scores_csv("image_id,attack,filter,score,label\na,clean,median,x,0\n"), Error);
  EXPECT_THROW(parse_scores_csv("image_id,attack,filter,score,label\na,clean,median,0.1,2\n"), Error);

  const auto path = std::filesystem::temp_directory_path() / "fmd_scores_test.csv";
  write_scores_csv(path.string(), recs);
  EXPECT_EQ(read_scores_csv(path.string()), recs);
  std::filesystem::remove(path);
}
