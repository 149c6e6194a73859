#include "adaptrack/core.hpp"

#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"

using namespace adaptrack;
using adaptrack::testing::make_detection;
using adaptrack::testing::throws_error;
using adaptrack::testing::vec;

TEST(EmbedDistance, HandValues) {
  EXPECT_EQ(embed_distance(vec({0, 0}), vec({0, 0})), 0.0);
  EXPECT_EQ(embed_distance(vec({1, 0}), vec({0, 0})), 1.0);
  EXPECT_EQ(embed_distance(vec({1, 2, 3}), vec({4, 6, 3})), 25.0);
}

TEST(EmbedDistance, DimensionMismatch) {
  EXPECT_TRUE(throws_error([] { embed_distance(vec({1, 2}), vec({1, 2, 3})); }, ErrorKind::dimension_mismatch));
}

TEST(EmbedDistance, RandomProperties) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int dim = 1 + trial % 17;
    Vector a(dim), b(dim);
    for (int i = 0; i < dim; ++i) {
      a(i) = g(rng);
      b(i) = g(rng);
    }
    double reference = 0.0;
    for (int i = 0; i < dim; ++i) reference += (a(i) - b(i)) * (a(i) - b(i));
    EXPECT_EQ(embed_distance(a, b), embed_distance(b, a));
    EXPECT_EQ(embed_distance(a, a), 0.0);
    EXPECT_GT(embed_distance(a, b), 0.0);
    EXPECT_NEAR(embed_distance(a, b), reference, 1e-12 * reference);
  }
}

TEST(Iou, Basics) {
  EXPECT_DOUBLE_EQ(iou({0, 0, 10, 10}, {0, 0, 10, 10}), 1.0);
  EXPECT_DOUBLE_EQ(iou({0, 0, 10, 10}, {20, 20, 10, 10}), 0.0);
  EXPECT_DOUBLE_EQ(iou({0, 0, 10, 10}, {5, 0, 10, 10}), 50.0 / 150.0);
}

TEST(FramesOverlap, SortedLists) {
  EXPECT_TRUE(frames_overlap({1, 3, 5}, {5, 6}));
  EXPECT_FALSE(frames_overlap({1, 3, 5}, {2, 4, 6}));
  EXPECT_FALSE(frames_overlap({}, {1}));
}

TEST(ValidateSequence, EmptySequenceIsValid) {
  const Sequence seq = validate_sequence({}, {{1, 0, 5}});
  EXPECT_TRUE(seq.detections().empty());
  EXPECT_EQ(seq.shots().size(), 1u);
}

TEST(ValidateSequence, OutOfShot) {
  EXPECT_TRUE(throws_error(
      [] { validate_sequence({make_detection(1, 10, {0, 0, 1, 1}, vec({1}))}, {{1, 0, 5}}); },
      ErrorKind::validation, "out-of-shot"));
}

TEST(ValidateSequence, DuplicateId) {
  EXPECT_TRUE(throws_error(
      [] {
        validate_sequence({make_detection(7, 1, {0, 0, 1, 1}, vec({1})), make_detection(7, 2, {0, 0, 1, 1}, vec({1}))},
                          {{1, 0, 5}});
      },
      ErrorKind::validation, "duplicate id"));
}

TEST(ValidateSequence, InconsistentFeatureDimension) {
  EXPECT_TRUE(throws_error(
      [] {
        validate_sequence(
            {make_detection(1, 1, {0, 0, 1, 1}, vec({1, 2})), make_detection(2, 2, {0, 0, 1, 1}, vec({1}))},
            {{1, 0, 5}});
      },
      ErrorKind::validation, "inconsistent feature dimension"));
}

TEST(ValidateSequence, RejectsBadBoxesScoresAndShots) {
  EXPECT_TRUE(throws_error([] { validate_sequence({make_detection(1, 1, {0, 0, 0, 1}, vec({1}))}, {{1, 0, 5}}); },
                           ErrorKind::validation, "non-positive box size"));
  EXPECT_TRUE(throws_error(
      [] {
        Detection d = make_detection(1, 1, {0, 0, 1, 1}, vec({1}));
        d.score = 1.5;
        validate_sequence({d}, {{1, 0, 5}});
      },
      ErrorKind::validation, "score outside"));
  EXPECT_TRUE(throws_error([] { validate_sequence({}, {{1, 0, 5}, {2, 5, 9}}); }, ErrorKind::validation,
                           "overlapping shots"));
}

TEST(ValidateSequence, IndexesShotsAndFrames) {
  const Sequence seq = validate_sequence({make_detection(3, 7, {0, 0, 1, 1}, vec({1})),
                                          make_detection(1, 2, {0, 0, 1, 1}, vec({2})),
                                          make_detection(2, 2, {0, 0, 1, 1}, vec({3}))},
                                         {{2, 6, 9}, {1, 0, 5}});
  EXPECT_EQ(seq.shots().front().shot_id, 1);
  EXPECT_EQ(seq.shot_index_of_frame(7), 1);
  EXPECT_EQ(seq.shot_index_of_frame(5), 0);
  EXPECT_EQ(seq.shot_index_of_frame(100), -1);
  const auto& frames = seq.frames_of_shot(0);
  ASSERT_EQ(frames.at(2).size(), 2u);
  EXPECT_EQ(seq.detections()[frames.at(2)[0]].id, 1);
  EXPECT_EQ(seq.detection(3).frame, 7);
  EXPECT_EQ(seq.feature_dim(), 1u);
}
