#include <cmath>

#include <doctest.h>

#include "edgecal/adam.hpp"
#include "edgecal/error.hpp"
#include "edgecal/matrix.hpp"
#include "edgecal/tape.hpp"
#include "helpers.hpp"

using namespace edgecal;
using testutil::fd_max_rel_error;
using testutil::rand_mat;

TEST_CASE("matmul identity and hand-computed product") {
  Rng rng(7);
  Matrix m = rand_mat(2, 2, rng);
  Matrix p = matmul(Matrix::identity(2), m);
  for (size_t i = 0; i < m.size(); ++i) CHECK(p.data[i] == m.data[i]);

  Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
  Matrix b = Matrix::from_rows({{1}, {1}});
  Matrix c = matmul(a, b);
  CHECK(c.at(0, 0) == 3.0);
  CHECK(c.at(1, 0) == 7.0);
}

TEST_CASE("matmul shape mismatch names both shapes") {
  Matrix a(2, 3), b(2, 2);
  try {
    matmul(a, b);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    std::string msg = e.what();
    CHECK(msg.find("2x3") != std::string::npos);
    CHECK(msg.find("2x2") != std::string::npos);
  }
}

TEST_CASE("sigmoid values and saturation") {
  Matrix x = Matrix::from_rows({{0.0, 710.0, 1.0, -710.0}});
  Matrix y = sigmoid(x);
  CHECK(y.at(0, 0) == 0.5);
  CHECK(y.at(0, 1) == 1.0);
  CHECK(y.at(0, 2) == doctest::Approx(0.7310585786).epsilon(1e-9));
  CHECK(y.at(0, 3) >= 0.0);
  CHECK(y.at(0, 3) < 1e-300);  // saturates to a subnormal, never negative
  CHECK(y.all_finite());
}

TEST_CASE("softplus values, asymptotes, positivity") {
  Matrix x = Matrix::from_rows({{0.0, 100.0, -100.0, -700.0}});
  Matrix y = softplus(x);
  CHECK(y.at(0, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(std::fabs(y.at(0, 1) - 100.0) < 1e-12);
  CHECK(y.at(0, 2) > 0.0);
  CHECK(y.at(0, 2) < 1e-40);
  CHECK(y.at(0, 3) > 0.0);  // strictly positive for all finite inputs
}

TEST_CASE("backward: linear sum and sigmoid product") {
  Rng rng(3);
  Tape tape;
  Var w = tape.leaf(rand_mat(2, 2, rng));
  GradientStore g = tape.backward(tape.sum(w));
  const Matrix& gw = g.grad(w);
  for (double v : gw.data) CHECK(v == 1.0);

  Tape t2;
  Var w2 = t2.leaf(Matrix(1, 1, 0.0));
  Var loss = t2.mul(t2.sigmoid(w2), t2.constant(Matrix(1, 1, 1.0)));
  GradientStore g2 = t2.backward(loss);
  CHECK(g2.grad(w2).scalar() == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("backward rejects non-scalar roots") {
  Tape tape;
  Var w = tape.leaf(Matrix(2, 2, 1.0));
  CHECK_THROWS_AS(tape.backward(tape.relu(w)), ContractError);
}

TEST_CASE("backward: random 3-layer MLP matches finite differences") {
  Rng rng(11);
  std::vector<Matrix> inputs = {rand_mat(4, 5, rng), rand_mat(5, 6, rng),
                                rand_mat(6, 4, rng), rand_mat(4, 1, rng)};
  // smooth activations keep the finite-difference probe off relu kinks;
  // relu itself is covered by the per-primitive test below
  auto build = [](Tape& t, const std::vector<Var>& v) {
    Var h = t.softplus(t.matmul(v[0], v[1]));
    h = t.softplus(t.matmul(h, v[2]));
    return t.sum(t.sigmoid(t.matmul(h, v[3])));
  };
  // larger step: deep sigmoids leave some coordinates with tiny gradients,
  // where h = 1e-5 is dominated by roundoff
  CHECK(fd_max_rel_error(inputs, build, 1e-4) < 1e-4);
}

TEST_CASE("finite differences pass for every differentiable primitive") {
  Rng rng(23);
  auto check = [&](const std::vector<Matrix>& in, const testutil::BuildFn& f) {
    CHECK(fd_max_rel_error(in, f) < 1e-4);
  };

  check({rand_mat(3, 4, rng), rand_mat(4, 2, rng)},
        [](Tape& t, const std::vector<Var>& v) {
          return t.sum(t.matmul(v[0], v[1]));
        });
  check({rand_mat(3, 3, rng), rand_mat(3, 3, rng)},
        [](Tape& t, const std::vector<Var>& v) {
          return t.mean(t.mul(t.add(v[0], v[1]), t.sub(v[0], v[1])));
        });
  check({rand_mat(2, 5, rng)}, [](Tape& t, const std::vector<Var>& v) {
    return t.sum(t.scale(t.sigmoid(v[0]), 1.7));
  });
  check({rand_mat(2, 5, rng)}, [](Tape& t, const std::vector<Var>& v) {
    return t.sum(t.softplus(v[0]));
  });
  check({rand_mat(4, 3, rng), rand_mat(1, 3, rng)},
        [](Tape& t, const std::vector<Var>& v) {
          return t.sum(t.relu(t.add_row_bias(v[0], v[1])));
        });
  check({rand_mat(3, 4, rng), rand_mat(3, 4, rng)},
        [](Tape& t, const std::vector<Var>& v) {
          return t.sum(t.hconcat(t.emin(v[0], v[1]), t.emax(v[0], v[1])));
        });
  check({rand_mat(5, 3, rng)}, [](Tape& t, const std::vector<Var>& v) {
    return t.sum(t.gather_rows(v[0], {4, 0, 2, 2}));
  });
  check({rand_mat(2, 3, rng), rand_mat(3, 3, rng)},
        [](Tape& t, const std::vector<Var>& v) {
          return t.sum(t.merge_rows(v[0], v[1], {1, 3}, {0, 2, 4}, 5));
        });
  check({rand_mat(4, 1, rng, 0.5, 2.0)},
        [](Tape& t, const std::vector<Var>& v) {
          Matrix numer = Matrix::from_rows({{1.0}, {-2.0}, {0.5}, {3.0}});
          return t.sum(t.sigmoid(t.div_const_by(numer, v[0])));
        });
  check({rand_mat(4, 2, rng)}, [](Tape& t, const std::vector<Var>& v) {
    return t.sum(t.row_sum(v[0]));
  });
  check({rand_mat(3, 3, rng), rand_mat(1, 1, rng)},
        [](Tape& t, const std::vector<Var>& v) {
          return t.sum(t.scale_var(v[0], v[1]));
        });

  // sparse operator with a fixed pattern
  SparseMatrix s;
  s.rows = s.cols = 3;
  s.row_ptr = {0, 2, 3, 4};
  s.col_idx = {0, 2, 1, 0};
  s.vals = {0.5, 1.5, -0.7, 2.0};
  check({rand_mat(3, 4, rng)}, [s](Tape& t, const std::vector<Var>& v) {
    return t.sum(t.spmm(s, v[0]));
  });
}

TEST_CASE("finite differences pass for the loss primitives") {
  Rng rng(31);
  Matrix labels(6, 1);
  for (int i = 0; i < 6; ++i) labels.data[i] = i % 2;

  for (bool mean : {false, true}) {
    CHECK(fd_max_rel_error({rand_mat(6, 1, rng)},
                           [labels, mean](Tape& t, const std::vector<Var>& v) {
                             return t.bce_with_logits(v[0], labels, mean);
                           }) < 1e-4);
  }
  CHECK(fd_max_rel_error({rand_mat(6, 1, rng)},
                         [labels](Tape& t, const std::vector<Var>& v) {
                           return t.confidence_penalty(t.sigmoid(v[0]), labels);
                         }) < 1e-4);

  // straight-through ECE: hold the bin assignment fixed across perturbations
  Matrix z = rand_mat(6, 1, rng);
  std::vector<int> bins;
  {
    Matrix p = sigmoid(z);
    for (double c : p.data) bins.push_back(testutil::width_bin(c, 15));
  }
  CHECK(fd_max_rel_error({z},
                         [labels, bins](Tape& t, const std::vector<Var>& v) {
                           return t.ece_loss(t.sigmoid(v[0]), labels, 15, bins);
                         }) < 1e-4);
}

TEST_CASE("tape replay is bit-identical") {
  Rng rng(41);
  Tape tape;
  Var x = tape.leaf(rand_mat(5, 4, rng));
  Var w = tape.leaf(rand_mat(4, 3, rng));
  Var h = tape.relu(tape.matmul(x, w));
  Var out = tape.sum(tape.sigmoid(h));
  tape.backward(out);
  CHECK(tape.replay_forward());
}

TEST_CASE("gradients accumulate across backward passes until reset") {
  Tape tape;
  Var w = tape.leaf(Matrix(2, 2, 1.0));
  Var loss = tape.sum(w);
  GradientStore total = tape.backward(loss);
  total.accumulate(tape.backward(loss));
  for (double v : total.grad(w).data) CHECK(v == 2.0);
  total.reset();
  CHECK_FALSE(total.has(w));
}

TEST_CASE("adam: zero gradient and zero decay leaves params unchanged") {
  Matrix p = Matrix::from_rows({{1.0, -2.0}});
  Matrix copy = p;
  AdamState st;
  AdamConfig cfg;
  cfg.weight_decay = 0.0;
  adam_step(p, Matrix(1, 2, 0.0), st, cfg);
  CHECK(p.data == copy.data);
}

TEST_CASE("adam: first step moves by -sign(g) * lr up to eps") {
  Matrix p(1, 2, 0.0);
  Matrix g = Matrix::from_rows({{0.3, -1.7}});
  AdamState st;
  AdamConfig cfg;
  cfg.lr = 1e-2;
  cfg.weight_decay = 0.0;
  adam_step(p, g, st, cfg);
  CHECK(p.at(0, 0) == doctest::Approx(-cfg.lr).epsilon(1e-6));
  CHECK(p.at(0, 1) == doctest::Approx(cfg.lr).epsilon(1e-6));
}

TEST_CASE("adam: 3-step trajectory on f(w)=w^2 matches hand recurrence") {
  AdamConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.0;
  Matrix p(1, 1, 1.0);
  AdamState st;

  double w = 1.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 3; ++t) {
    double g = 2.0 * w;
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
    double mh = m / (1.0 - std::pow(cfg.beta1, t));
    double vh = v / (1.0 - std::pow(cfg.beta2, t));
    w -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps);

    Matrix grad(1, 1, 2.0 * p.scalar());
    adam_step(p, grad, st, cfg);
  }
  CHECK(std::fabs(p.scalar() - w) < 1e-12);
}

TEST_CASE("adam: decoupled weight decay applied before the adaptive step") {
  AdamConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.5;
  Matrix p(1, 1, 1.0);
  AdamState st;
  adam_step(p, Matrix(1, 1, 0.0), st, cfg);
  // zero gradient: only the decay term lr*wd*p acts
  CHECK(p.scalar() == doctest::Approx(1.0 - 0.1 * 0.5).epsilon(1e-12));
}

TEST_CASE("adam shape mismatch is rejected") {
  Matrix p(2, 2, 1.0);
  AdamState st;
  CHECK_THROWS_AS(adam_step(p, Matrix(1, 2, 0.0), st, AdamConfig{}),
                  ContractError);
}

TEST_CASE("ParamStore applies gradients in insertion order deterministically") {
  ParamStore a, b;
  Rng rng(5);
  Matrix w = rand_mat(2, 2, rng);
  a.add("w", w);
  b.add("w", w);
  for (ParamStore* s : {&a, &b}) {
    Tape tape;
    std::vector<Var> leaves = s->leaves(tape);
    Var loss = tape.sum(tape.mul(leaves[0], leaves[0]));
    GradientStore g = tape.backward(loss);
    s->apply_gradients(leaves, g, AdamConfig{});
  }
  CHECK(a == b);
}
