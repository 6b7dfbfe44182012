#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "user/common/rng.hpp"
#include "user/numerics/adam.hpp"
#include "user/numerics/checkpoint.hpp"
#include "user/numerics/grad_check.hpp"
#include "user/numerics/segment_ops.hpp"

namespace user::ad {
namespace {

using Mat = Matrix<double>;

Mat random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

// Reduces an op output to a scalar with fixed random weights so every output
// coordinate carries a distinct gradient.
Var<double> weighted_sum(Var<double> y, std::uint64_t seed) {
  Rng rng(seed);
  auto w = y.graph().constant(random_matrix(y.rows(), y.cols(), rng));
  return sum(mul(y, w));
}

struct OpCase {
  const char* name;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> inputs;
  std::function<Var<double>(Graph<double>&, const std::vector<Var<double>>&)> op;
};

double op_grad_error(const OpCase& c, std::uint64_t seed) {
  ParamStore<double> store;
  Rng rng(seed);
  std::vector<ParamId> ids;
  for (std::size_t i = 0; i < c.inputs.size(); ++i)
    ids.push_back(store.add("x" + std::to_string(i), random_matrix(c.inputs[i].first, c.inputs[i].second, rng)));
  auto loss = [&](Graph<double>& g) {
    std::vector<Var<double>> xs;
    for (auto id : ids) xs.push_back(g.param(id));
    return weighted_sum(c.op(g, xs), seed + 1);
  };
  return grad_check(loss, store, 1e-5, 64, seed).max_rel_error;
}

std::vector<double> mus() { return {1.0, 0.5, 0.0, -0.5}; }
std::vector<double> sigmas() { return {0.3, 0.3, 0.3, 0.3}; }

std::vector<OpCase> op_cases() {
  using V = std::vector<Var<double>>;
  return {
      {"matmul", {{3, 4}, {4, 5}}, [](auto&, const V& x) { return matmul(x[0], x[1]); }},
      {"transpose", {{3, 4}}, [](auto&, const V& x) { return transpose(x[0]); }},
      {"add", {{3, 4}, {3, 4}}, [](auto&, const V& x) { return add(x[0], x[1]); }},
      {"sub", {{3, 4}, {3, 4}}, [](auto&, const V& x) { return sub(x[0], x[1]); }},
      {"add_bias", {{3, 4}, {3, 1}}, [](auto&, const V& x) { return add_bias(x[0], x[1]); }},
      {"mul", {{3, 4}, {3, 4}}, [](auto&, const V& x) { return mul(x[0], x[1]); }},
      {"scale", {{3, 4}}, [](auto&, const V& x) { return scale(x[0], -2.5); }},
      {"add_scalar", {{3, 4}}, [](auto&, const V& x) { return add_scalar(x[0], 0.7); }},
      {"tanh", {{3, 4}}, [](auto&, const V& x) { return tanh(x[0]); }},
      {"relu", {{3, 4}}, [](auto&, const V& x) { return relu(x[0]); }},
      {"exp", {{3, 4}}, [](auto&, const V& x) { return exp(x[0]); }},
      {"log", {{3, 4}}, [](auto&, const V& x) { return log(add_scalar(mul(x[0], x[0]), 0.5)); }},
      {"clamp_min", {{3, 4}}, [](auto&, const V& x) { return clamp_min(x[0], 0.1); }},
      {"concat_cols", {{3, 2}, {3, 3}}, [](auto&, const V& x) { return concat_cols(V{x[0], x[1]}); }},
      {"concat_rows", {{2, 3}, {4, 3}}, [](auto&, const V& x) { return concat_rows(V{x[0], x[1]}); }},
      {"slice_cols", {{3, 6}}, [](auto&, const V& x) { return slice_cols(x[0], 2, 3); }},
      {"slice_rows", {{6, 3}}, [](auto&, const V& x) { return slice_rows(x[0], 1, 4); }},
      {"column", {{3, 6}}, [](auto&, const V& x) { return column(x[0], 4); }},
      {"sum", {{3, 4}}, [](auto&, const V& x) { return sum(x[0]); }},
      {"sum_axis0", {{3, 4}}, [](auto&, const V& x) { return sum(x[0], 0); }},
      {"sum_axis1", {{3, 4}}, [](auto&, const V& x) { return sum(x[0], 1); }},
      {"mean", {{3, 4}}, [](auto&, const V& x) { return mean(x[0]); }},
      {"mean_axis1", {{3, 4}}, [](auto&, const V& x) { return mean(x[0], 1); }},
      {"softmax_axis0", {{5, 3}}, [](auto&, const V& x) { return softmax(x[0], 0); }},
      {"softmax_axis1", {{3, 5}}, [](auto&, const V& x) { return softmax(x[0], 1); }},
      {"softmax_masked", {{5, 3}}, [](auto&, const V& x) { return softmax(x[0], 0, {true, false, true, true, false}); }},
      {"cosine", {{4, 1}, {4, 1}}, [](auto&, const V& x) { return cosine_similarity(x[0], x[1]); }},
      {"normalize_cols", {{4, 3}}, [](auto&, const V& x) { return normalize_cols(x[0]); }},
      {"layer_norm", {{5, 3}, {5, 1}, {5, 1}}, [](auto&, const V& x) { return layer_norm(x[0], x[1], x[2]); }},
      {"embedding", {{6, 3}}, [](auto&, const V& x) { return embedding(x[0], {4, 1, 4, 0}); }},
      {"attention", {{4, 3}, {4, 5}, {6, 5}},
       [](auto&, const V& x) { return multihead_attention(x[0], x[1], x[2], 2, {true, true, false, true, true}); }},
      {"segmented_attention", {{4, 7}, {4, 7}, {6, 7}},
       [](auto&, const V& x) { return segmented_attention(x[0], x[1], x[2], 2, {0, 3, 3, 7}, {true, true, true, true, false, true, true}); }},
      {"segmented_softmax", {{1, 7}},
       [](auto&, const V& x) { return segmented_softmax(x[0], {0, 2, 7}, {true, true, true, false, true, true, true}); }},
      {"segment_sum", {{3, 7}, {1, 7}}, [](auto&, const V& x) { return segment_sum(x[0], x[1], {0, 4, 4, 7}); }},
      {"kernel_pooling", {{3, 4}},
       [](auto&, const V& x) { return kernel_pooling(tanh(x[0]), mus(), sigmas(), {true, false, true}, {}); }},
      {"group_nll", {{5, 1}}, [](auto&, const V& x) { return group_nll(x[0]); }},
  };
}

TEST(OpGradients, CentralDifferences) {
  for (const auto& c : op_cases()) {
    for (std::uint64_t seed : {1u, 2u, 3u}) EXPECT_LT(op_grad_error(c, seed * 31), 1e-6) << c.name << " seed " << seed;
  }
}

TEST(Ops, SoftmaxOfZerosIsUniform) {
  Graph<double> g;
  auto y = softmax(g.constant(Mat::Zero(3, 1)), 0);
  for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(y.value()(i, 0), 1.0 / 3.0);
}

TEST(Ops, MaskedSoftmaxZeroesAndRenormalizes) {
  Graph<double> g;
  Mat x(4, 1);
  x << 1.0, 50.0, 2.0, -1.0;
  auto y = softmax(g.constant(x), 0, {true, false, true, true});
  EXPECT_EQ(y.value()(1, 0), 0.0);
  EXPECT_NEAR(y.value().sum(), 1.0, 1e-15);
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(-1.0);
  EXPECT_NEAR(y.value()(2, 0), std::exp(2.0) / z, 1e-15);
}

TEST(Ops, MaskedPositionsGetZeroGradient) {
  ParamStore<double> store;
  Rng rng(4);
  auto id = store.add("x", random_matrix(5, 1, rng));
  Graph<double> g(&store);
  store.zero_grad();
  auto l = weighted_sum(softmax(g.param(id), 0, {true, false, true, false, true}), 9);
  g.backward(l);
  EXPECT_EQ(store[id].grad(1, 0), 0.0);
  EXPECT_EQ(store[id].grad(3, 0), 0.0);
  EXPECT_NE(store[id].grad(0, 0), 0.0);
}

TEST(Ops, CosineOfSelfIsOne) {
  Rng rng(6);
  Graph<double> g;
  for (int t = 0; t < 10; ++t) {
    auto v = g.constant(random_matrix(7, 1, rng, 0.1 + t));
    EXPECT_NEAR(cosine_similarity(v, v).scalar(), 1.0, 1e-14);
  }
}

TEST(Ops, MatmulMatchesTripleLoop) {
  Rng rng(7);
  const Mat a = random_matrix(2, 3, rng), b = random_matrix(3, 4, rng);
  Graph<double> g;
  auto c = matmul(g.constant(a), g.constant(b)).value();
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 4; ++j) {
      double s = 0;
      for (int k = 0; k < 3; ++k) s += a(i, k) * b(k, j);
      EXPECT_NEAR(c(i, j), s, 1e-12);
    }
}

TEST(Ops, ShapeMismatchNamesBothShapes) {
  Graph<double> g;
  auto a = g.constant(Mat::Zero(2, 3));
  auto b = g.constant(Mat::Zero(2, 3));
  try {
    matmul(a, b);
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("2x3 vs 2x3"), std::string::npos);
  }
  EXPECT_THROW(add(a, g.constant(Mat::Zero(3, 2))), ShapeError);
  EXPECT_THROW(softmax(a, 0, {true}), ShapeError);
}

TEST(Ops, SegmentOpsMatchPerSegmentOps) {
  Rng rng(8);
  const Segments seg{0, 3, 4, 8};
  const Mask mask{true, true, false, true, true, false, true, true};
  const Mat q = random_matrix(4, 8, rng), k = random_matrix(4, 8, rng), v = random_matrix(6, 8, rng);
  Graph<double> g;
  auto packed = segmented_attention(g.constant(q), g.constant(k), g.constant(v), 2, seg, mask).value();
  for (std::size_t s = 0; s + 1 < seg.size(); ++s) {
    const auto b = seg[s], n = seg[s + 1] - seg[s];
    Mask m(mask.begin() + b, mask.begin() + b + n);
    auto one = multihead_attention(g.constant(q.middleCols(b, n)), g.constant(k.middleCols(b, n)),
                                   g.constant(v.middleCols(b, n)), 2, m)
                   .value();
    EXPECT_LT((one - packed.middleCols(b, n)).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Backward, SumGivesOnes) {
  ParamStore<double> store;
  Rng rng(1);
  auto id = store.add("w", random_matrix(3, 4, rng));
  Graph<double> g(&store);
  g.backward(sum(g.param(id)));
  EXPECT_TRUE(store[id].grad.isApproxToConstant(1.0));
}

TEST(Backward, CosineOfOrthogonalUnitVectors) {
  ParamStore<double> store;
  Mat a = Mat::Zero(3, 1), b = Mat::Zero(3, 1);
  a(0, 0) = 1;
  b(2, 0) = 1;
  auto ia = store.add("a", a);
  auto ib = store.add("b", b);
  Graph<double> g(&store);
  g.backward(cosine_similarity(g.param(ia), g.param(ib)));
  EXPECT_LT((store[ia].grad - b).norm(), 1e-15);
  EXPECT_LT((store[ib].grad - a).norm(), 1e-15);
}

TEST(Backward, RepeatedCallsAccumulate) {
  ParamStore<double> store;
  Rng rng(2);
  auto id = store.add("w", random_matrix(2, 2, rng));
  Graph<double> g(&store);
  auto l = sum(mul(g.param(id), g.param(id)));
  g.backward(l);
  const Mat once = store[id].grad;
  g.backward(l);
  EXPECT_LT((store[id].grad - 2 * once).norm(), 1e-14);
  store.zero_grad();
  EXPECT_EQ(store[id].grad.norm(), 0.0);
}

TEST(Backward, NonScalarLossRejected) {
  ParamStore<double> store;
  auto id = store.add("w", Mat::Ones(2, 2));
  Graph<double> g(&store);
  EXPECT_THROW(g.backward(g.param(id)), ShapeError);
}

TEST(CheckedMode, NonFiniteValueThrows) {
  Graph<double> g;
  Mat x(1, 1);
  x << 800.0;
  EXPECT_THROW(exp(g.constant(x)), NumericError);
}

TEST(GradCheck, QuadraticIsTight) {
  ParamStore<double> store;
  Rng rng(3);
  auto id = store.add("x", random_matrix(4, 3, rng));
  auto loss = [&](Graph<double>& g) { return sum(mul(g.param(id), g.param(id))); };
  EXPECT_LT(grad_check(loss, store).max_rel_error, 1e-9);
}

// A square with a backward rule of the wrong sign.
Var<double> broken_square(Var<double> a) {
  const int ia = a.id();
  return a.graph().record(
      a.value().cwiseAbs2(), {a},
      [ia](Graph<double>& g, const Mat& G) { g.accumulate(ia, (-2.0 * G.cwiseProduct(g.value(ia))).eval()); },
      "broken_square");
}

TEST(GradCheck, DetectsSignBug) {
  ParamStore<double> store;
  Mat x = Mat::Constant(3, 1, 1.5);
  auto id = store.add("x", x);
  auto loss = [&](Graph<double>& g) { return sum(broken_square(g.param(id))); };
  EXPECT_GT(grad_check(loss, store).max_rel_error, 1e-1);
}

TEST(GradCheck, NonFiniteLossThrows) {
  ParamStore<double> store;
  auto id = store.add("x", Mat::Zero(1, 1));
  auto loss = [&](Graph<double>& g) {
    auto x = g.param(id);
    g.set_checked(false);
    return log(x);
  };
  EXPECT_THROW(grad_check(loss, store), NumericError);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParamStore<double> store;
  auto id = store.add("x", Mat::Constant(1, 1, 2.0));
  store.zero_grad();
  store[id].grad(0, 0) = 1.0;
  adam_step(store);
  EXPECT_NEAR(store[id].value(0, 0), 2.0 - 1e-3, 1e-10);
  EXPECT_EQ(store[id].grad(0, 0), 0.0);
}

TEST(Adam, ZeroGradientLeavesValueAndDecaysMoments) {
  ParamStore<double> store;
  auto id = store.add("x", Mat::Constant(1, 1, 2.0));
  store.zero_grad();
  store[id].grad(0, 0) = 0.5;
  adam_step(store);
  const double value = store[id].value(0, 0), m = store[id].m(0, 0), v = store[id].v(0, 0);
  store.zero_grad();
  adam_step(store);
  EXPECT_NEAR(store[id].m(0, 0), 0.9 * m, 1e-18);
  EXPECT_NEAR(store[id].v(0, 0), 0.999 * v, 1e-18);
  // Momentum still moves it; a fresh store with only zero gradients does not.
  ParamStore<double> idle;
  auto j = idle.add("y", Mat::Constant(2, 2, 3.0));
  for (int t = 0; t < 5; ++t) {
    idle.zero_grad();
    adam_step(idle);
  }
  EXPECT_TRUE(idle[j].value.isApproxToConstant(3.0));
  EXPECT_NE(value, 2.0);
}

TEST(Adam, MissingGradientNamesParameter) {
  ParamStore<double> store;
  store.add("lonely", Mat::Ones(1, 1));
  try {
    adam_step(store);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("lonely"), std::string::npos);
  }
}

TEST(Adam, QuadraticMatchesReferenceRecurrence) {
  ParamStore<double> store;
  auto id = store.add("x", Mat::Constant(1, 1, 5.0));
  AdamOptions opt;
  opt.lr = 0.1;
  double x = 5.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 100; ++t) {
    Graph<double> g(&store);
    store.zero_grad();
    g.backward(sum(mul(g.param(id), g.param(id))));
    adam_step(store, opt);
    const double grad = 2 * x;
    m = 0.9 * m + 0.1 * grad;
    v = 0.999 * v + 0.001 * grad * grad;
    x -= 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
  }
  EXPECT_NEAR(store[id].value(0, 0), x, 1e-9);
  EXPECT_LT(std::abs(x), 0.5);
}

class CheckpointTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("user_ckpt_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::filesystem::path dir_;
};

TEST_F(CheckpointTest, RoundTripAndLayout) {
  ParamStore<float> store;
  Matrix<float> a(2, 3);
  a << 1, 2, 3, 4, 5, 6;
  store.add("layer.a", a);
  store.add("b", Matrix<float>::Constant(1, 1, -0.25f));
  save_checkpoint(dir_ / "m.ckpt", store);

  std::ifstream in(dir_ / "m.ckpt", std::ios::binary);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), {});
  ASSERT_GE(bytes.size(), 12u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "USRK");
  std::uint32_t version = 0, count = 0, name_len = 0;
  std::memcpy(&version, bytes.data() + 4, 4);
  std::memcpy(&count, bytes.data() + 8, 4);
  std::memcpy(&name_len, bytes.data() + 12, 4);
  EXPECT_EQ(version, kCheckpointVersion);
  EXPECT_EQ(count, 2u);
  EXPECT_EQ(std::string(bytes.data() + 16, name_len), "layer.a");
  // rank, dims, then row-major values: second value is a(0, 1).
  float second = 0;
  std::memcpy(&second, bytes.data() + 16 + name_len + 12 + 4, 4);
  EXPECT_EQ(second, 2.0f);

  ParamStore<float> other;
  other.add("layer.a", Matrix<float>::Zero(2, 3));
  other.add("b", Matrix<float>::Zero(1, 1));
  load_checkpoint(dir_ / "m.ckpt", other);
  EXPECT_EQ(other.at("layer.a").value, a);
  EXPECT_EQ(other.at("b").value(0, 0), -0.25f);
}

TEST_F(CheckpointTest, ShapeMismatchFailsLoudly) {
  ParamStore<float> store;
  store.add("w", Matrix<float>::Ones(2, 3));
  save_checkpoint(dir_ / "m.ckpt", store);
  ParamStore<float> wrong;
  wrong.add("w", Matrix<float>::Ones(3, 2));
  try {
    load_checkpoint(dir_ / "m.ckpt", wrong);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("2x3"), std::string::npos);
  }
  ParamStore<float> renamed;
  renamed.add("v", Matrix<float>::Ones(2, 3));
  EXPECT_THROW(load_checkpoint(dir_ / "m.ckpt", renamed), Error);
}

TEST_F(CheckpointTest, CorruptFilesRejected) {
  {
    std::ofstream out(dir_ / "bad.ckpt", std::ios::binary);
    out << "NOPE1234";
  }
  EXPECT_THROW(read_checkpoint_entries(dir_ / "bad.ckpt"), Error);
  ParamStore<float> store;
  store.add("w", Matrix<float>::Ones(4, 4));
  save_checkpoint(dir_ / "m.ckpt", store);
  std::filesystem::resize_file(dir_ / "m.ckpt", std::filesystem::file_size(dir_ / "m.ckpt") - 3);
  EXPECT_THROW(read_checkpoint_entries(dir_ / "m.ckpt"), Error);
}

}  // namespace
}  // namespace user::ad
