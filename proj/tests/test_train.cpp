#include <algorithm>

#include <gtest/gtest.h>

#include "support.hpp"
#include "xrecon/errors.hpp"
#include "xrecon/train.hpp"

using namespace xrecon;

namespace {

struct Fixture {
  RunConfig config = support::tiny_config();
  std::vector<PreparedCase> train;
  std::vector<PreparedCase> val;

  Fixture() {
    config.data.volume_resolution = 32;
    const auto split = make_dataset(config.data.n_train, config.data.n_val, config.data.n_test, config.data.base_seed);
    train = prepare_cases(split.train, config, true);
    val = prepare_cases(split.val, config, true);
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

bool same_params(const Model<float>& a, const Model<float>& b) {
  for (const auto& [name, p] : a.params) {
    const auto& q = b.params.at(name);
    if (!std::equal(p.data().begin(), p.data().end(), q.data().begin())) return false;
  }
  return a.params.size() == b.params.size();
}

}  // namespace

TEST(Seeds, MixSeedSeparatesStreams) {
  EXPECT_EQ(mix_seed(1, 2), mix_seed(1, 2));
  EXPECT_NE(mix_seed(1, 2), mix_seed(2, 1));
  EXPECT_NE(mix_seed(0, 0), mix_seed(0, 1));
}

TEST(Train, PreparedCaseCarriesNormalizedInputs) {
  const auto& c = fixture().train[0];
  ASSERT_EQ(c.inputs.size(), 2u);
  for (const auto& v : c.inputs) {
    EXPECT_EQ(v.augmented.size(), 4u);
    EXPECT_TRUE(v.original.normalized);
    EXPECT_EQ(*std::max_element(v.original.pixels.begin(), v.original.pixels.end()), 1.0f);
  }
  const auto no_aug = prepare_case(c.seed, fixture().config, false);
  EXPECT_TRUE(no_aug.inputs[0].augmented.empty());
  EXPECT_EQ(no_aug.inputs[0].original.pixels, c.inputs[0].original.pixels);
}

TEST(Train, TeacherIsDeterministic) {
  const auto& f = fixture();
  const auto a = train_teacher(f.config, f.train, f.val);
  const auto b = train_teacher(f.config, f.train, f.val);
  EXPECT_TRUE(same_params(a.model, b.model));
  ASSERT_EQ(a.trace.size(), f.config.train.epochs * f.train.size());
  EXPECT_EQ(a.trace.back().total, b.trace.back().total);
  EXPECT_EQ(a.best_val, b.best_val);
  EXPECT_EQ(a.model.role, Role::teacher);
}

TEST(Train, StudentDeterministicWithDistillationTerm) {
  const auto& f = fixture();
  auto teacher = train_teacher(f.config, f.train, f.val).model;
  const auto a = train_student(f.config, f.train, f.val, &teacher);
  const auto b = train_student(f.config, f.train, f.val, &teacher);
  EXPECT_EQ(a.model.role, Role::student);
  EXPECT_TRUE(same_params(a.model, b.model));
  for (const auto& row : a.trace) {
    EXPECT_GT(row.distill, 0.0);
    EXPECT_NEAR(row.total, row.recon + 0.2 / 2 * row.distill, 1e-5 * row.total);
  }
}

TEST(Train, AlphaZeroTrainsBaselineWithoutTeacher) {
  const auto& f = fixture();
  RunConfig c = f.config;
  c.model.alpha = 0;
  const auto r = train_student(c, f.train, f.val, nullptr);
  EXPECT_EQ(r.model.role, Role::baseline);
  EXPECT_FALSE(r.model.params.contains("enc_s.conv1.w"));
  for (const auto& row : r.trace) EXPECT_EQ(row.distill, 0.0);
}

TEST(Train, StudentTeacherMismatchIsConfigError) {
  const auto& f = fixture();
  EXPECT_THROW(train_student(f.config, f.train, f.val, nullptr), ConfigError);
  RunConfig other = f.config;
  other.model.slabs = 2;
  auto wrong_k = init_model<float>(Role::teacher, other.model, 2, 0);
  EXPECT_THROW(train_student(f.config, f.train, f.val, &wrong_k), ConfigError);
  other = f.config;
  other.model.channels = 8;
  auto wrong_c = init_model<float>(Role::teacher, other.model, 2, 0);
  EXPECT_THROW(train_student(f.config, f.train, f.val, &wrong_c), ConfigError);
  auto not_teacher = init_model<float>(Role::baseline, f.config.model, 2, 0);
  EXPECT_THROW(train_student(f.config, f.train, f.val, &not_teacher), ConfigError);
}

TEST(Train, LossDecreases) {
  const auto& f = fixture();
  RunConfig c = f.config;
  c.train.epochs = 12;
  c.model.alpha = 0;
  const auto r = train_student(c, f.train, f.val, nullptr);
  ASSERT_EQ(r.epochs.size(), 12u);
  EXPECT_LT(r.epochs.back().train_recon, r.epochs.front().train_recon);
  EXPECT_LT(r.best_val, r.epochs.front().val_recon + 1e-12);
}

TEST(Train, ValidationBatchIsFixed) {
  const auto& c = fixture().val[0];
  const auto a = validation_batch(c, 64), b = validation_batch(c, 64);
  for (std::size_t i = 0; i < 64; ++i) EXPECT_EQ(a.points[i], b.points[i]);
}

TEST(Train, TraceCsvHasHeaderAndRows) {
  support::TempDir dir("trace");
  std::vector<TraceRow> rows{{1, 0, 0.5, 0.1, 0.52}, {2, 0, 0.4, 0.1, 0.42}};
  write_trace_csv(rows, dir / "trace.csv");
  const std::string text = read_text(dir / "trace.csv");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
  EXPECT_EQ(text.rfind("step,", 0), 0u);
}
