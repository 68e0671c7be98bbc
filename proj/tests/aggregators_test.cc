// Copyright 2026 The CRAFT Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <random>

#include <doctest.h>

#include "craft/aggregators.h"
#include "craft/errors.h"

namespace craft {
namespace {

Eigen::VectorXd Vec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

std::vector<ClientUpdate> RandomUpdates(std::mt19937_64& rng, int m, int d) {
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<int> size(20, 200);
  std::vector<ClientUpdate> out(m);
  for (int i = 0; i < m; ++i) {
    out[i].client_id = 10 + i;
    out[i].weight = size(rng);
    out[i].delta.resize(d);
    for (int j = 0; j < d; ++j) out[i].delta[j] = normal(rng);
  }
  return out;
}

bool BitwiseEqual(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.size() == b.size() && (a.array() == b.array()).all();
}

TEST_CASE("LayerLayout invariants") {
  CHECK_THROWS_AS(LayerLayout({}), InvalidInputError);
  CHECK_THROWS_AS(LayerLayout({{0, 2}, {3, 1}}), InvalidInputError);
  CHECK_THROWS_AS(LayerLayout({{0, 2}, {2, 0}}), InvalidInputError);
  const LayerLayout l = LayerLayout::FromLengths({3, 1, 4});
  CHECK(l.dim() == 8);
  CHECK(l.num_layers() == 3);
  CHECK(l[2] == LayerSpan{4, 4});
}

TEST_CASE("BuildTargets") {
  auto targets = [](std::vector<double> w) {
    std::vector<ClientUpdate> u(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
      u[i].weight = w[i];
      u[i].delta = Vec({1.0});
    }
    return BuildTargets(u);
  };
  CHECK(targets({10, 30}).isApprox(Vec({0.25, 0.75})));
  CHECK(targets({5, 5, 5, 5}).isApprox(Vec({0.25, 0.25, 0.25, 0.25})));
  CHECK(targets({20, 20, 60}).isApprox(Vec({0.2, 0.2, 0.6})));
  CHECK(targets({3, 7, 11}).sum() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(targets({}), InvalidInputError);
  CHECK_THROWS_AS(targets({1, 0}), InvalidInputError);
}

TEST_CASE("SelectActive") {
  SUBCASE("gates near-zero layers and renormalizes") {
    const ActiveSet a = SelectActive(Vec({1.0, 1e-9, 0.5}), 1e-6, Vec({0.2, 0.3, 0.5}));
    CHECK(a.indices == std::vector<int>{0, 2});
    CHECK(a.targets.isApprox(Vec({0.2 / 0.7, 0.5 / 0.7}), 1e-15));
  }
  SUBCASE("no gating") {
    const ActiveSet a = SelectActive(Vec({1.0, 2.0}), 1e-6, Vec({0.4, 0.6}));
    CHECK(a.indices == std::vector<int>{0, 1});
    CHECK(a.targets.isApprox(Vec({0.4, 0.6}), 1e-15));
  }
  SUBCASE("everything gated") {
    const ActiveSet a = SelectActive(Vec({1e-9, 0.0}), 1e-6, Vec({0.4, 0.6}));
    CHECK(a.empty());
  }
}

TEST_CASE("FedAvgAggregate") {
  std::vector<ClientUpdate> u(2);
  u[0] = {0, 1.0, Vec({1, 0})};
  u[1] = {1, 1.0, Vec({0, 1})};
  CHECK(FedAvgAggregate(u).isApprox(Vec({0.5, 0.5})));
  u[0] = {0, 1.0, Vec({4, 0})};
  u[1] = {1, 3.0, Vec({0, 4})};
  CHECK(FedAvgAggregate(u).isApprox(Vec({1, 3})));
  CHECK(FedAvgAggregate(std::span(u).first(1)).isApprox(Vec({4, 0})));
  CHECK_THROWS_AS(FedAvgAggregate({}), InvalidInputError);
}

TEST_CASE("ServerMomentumStep") {
  const Eigen::VectorXd a = Vec({1.0, -2.0});
  AggregatorState s;
  CHECK(ServerMomentumStep(s, a, 0.0).isApprox(a));

  AggregatorState h;
  CHECK(ServerMomentumStep(h, a, 0.9).isApprox(a));
  CHECK(ServerMomentumStep(h, a, 0.9).isApprox(1.9 * a));

  AggregatorState z;
  z.momentum = a;
  CHECK(ServerMomentumStep(z, Vec({0, 0}), 0.5).isApprox(0.5 * a));
  CHECK_THROWS_AS(ServerMomentumStep(z, a, 1.0), InvalidInputError);
}

TEST_CASE("AdaptiveServerStep") {
  AdaptiveOptions opt;
  opt.tau = 1e-3;
  for (AdaptiveVariant v :
       {AdaptiveVariant::kAdagrad, AdaptiveVariant::kAdam, AdaptiveVariant::kYogi}) {
    AggregatorState s;
    CHECK(AdaptiveServerStep(s, Vec({0, 0, 0}), v, opt).isZero(0.0));
  }
  SUBCASE("adagrad first step") {
    // v = 1, m = 1  =>  1 / (1 + tau)
    AggregatorState s;
    const Eigen::VectorXd g = AdaptiveServerStep(s, Vec({1.0}), AdaptiveVariant::kAdagrad, opt);
    CHECK(g[0] == doctest::Approx(1.0 / (1.0 + 1e-3)).epsilon(1e-15));
  }
  SUBCASE("adam without memory is sign-like") {
    AdaptiveOptions o = opt;
    o.beta1 = 0.0;
    o.beta2 = 0.0;
    AggregatorState s;
    const Eigen::VectorXd avg = Vec({0.5, -2.0, 3e-3});
    const Eigen::VectorXd g = AdaptiveServerStep(s, avg, AdaptiveVariant::kAdam, o);
    const Eigen::VectorXd expected =
        (avg.array() / (avg.array().abs() + o.tau)).matrix();
    CHECK(g.isApprox(expected, 1e-14));
  }
  SUBCASE("yogi accumulates like adam from a fresh state") {
    AggregatorState a, y;
    const Eigen::VectorXd avg = Vec({0.3, -0.7});
    const Eigen::VectorXd ga = AdaptiveServerStep(a, avg, AdaptiveVariant::kAdam, opt);
    const Eigen::VectorXd gy = AdaptiveServerStep(y, avg, AdaptiveVariant::kYogi, opt);
    CHECK(ga.isApprox(gy, 1e-14));
  }
}

TEST_CASE("CountConflicts") {
  std::vector<ClientUpdate> u(2);
  u[0] = {0, 1.0, Vec({1, 0})};
  u[1] = {1, 1.0, Vec({1, 1})};
  CHECK(CountConflicts(u, Vec({1, 0.1})) == 0);
  CHECK(CountConflicts(std::span(u).first(1), -u[0].delta) == 1);
  CHECK(CountConflicts(u, Vec({-1, 0.5})) == 2);
  const std::vector<int> only_second{1};
  CHECK(CountConflicts(u, Vec({-1, 1.5}), only_second) == 0);
}

TEST_CASE("CraftAggregate examples") {
  const CraftOptions opt;

  SUBCASE("single layer with a stored reference") {
    std::vector<ClientUpdate> u(2);
    u[0] = {0, 1.0, Vec({2, 0, 0})};
    u[1] = {1, 1.0, Vec({0, 3, 0})};
    AggregatorState s;
    s.kind = AggregatorKind::kCraft;
    s.round = 1;
    s.prev_update = Vec({0, 0, 5});
    const Eigen::VectorXd g = CraftAggregate(u, s, LayerLayout::Single(3), opt);
    // Rows are shrunk by the stabilizer; <u_i, g> still hits 0.5 exactly.
    CHECK(g.isApprox(Vec({0.5, 0.5, 1}), 1e-7));
    CHECK(s.prev_update.has_value());
    CHECK(BitwiseEqual(*s.prev_update, g));
    CHECK(s.round == 2);
  }

  SUBCASE("first round equals layer-wise ConfigDirection") {
    std::mt19937_64 rng(3);
    const LayerLayout layout = LayerLayout::FromLengths({6, 2, 5});
    const auto updates = RandomUpdates(rng, 3, 13);
    AggregatorState s;
    s.kind = AggregatorKind::kCraft;
    const Eigen::VectorXd g = CraftAggregate(updates, s, layout, opt);
    const Eigen::VectorXd rho = BuildTargets(updates);
    for (const LayerSpan& span : layout.spans()) {
      Eigen::MatrixXd raw(3, static_cast<Eigen::Index>(span.length));
      for (int i = 0; i < 3; ++i)
        raw.row(i) = updates[i].delta.segment(span.offset, span.length).transpose();
      const ProjectionResult c =
          ConfigDirection(AlignmentMatrix::FromDirections(raw), rho);
      CHECK(BitwiseEqual(g.segment(span.offset, span.length), c.direction));
    }
  }

  SUBCASE("layers are solved independently") {
    std::mt19937_64 rng(8);
    const LayerLayout layout = LayerLayout::FromLengths({4, 5});
    const auto updates = RandomUpdates(rng, 2, 9);
    AggregatorState s;
    s.kind = AggregatorKind::kCraft;
    s.round = 3;
    s.prev_update = RandomUpdates(rng, 1, 9)[0].delta;
    const Eigen::VectorXd prev = *s.prev_update;
    AggregationDiagnostics diag;
    const Eigen::VectorXd g = CraftAggregate(updates, s, layout, opt, &diag);
    const Eigen::VectorXd rho = BuildTargets(updates);
    Eigen::VectorXd expected(9);
    for (const LayerSpan& span : layout.spans()) {
      Eigen::MatrixXd raw(2, static_cast<Eigen::Index>(span.length));
      for (int i = 0; i < 2; ++i)
        raw.row(i) = updates[i].delta.segment(span.offset, span.length).transpose();
      expected.segment(span.offset, span.length) =
          CraftCorrect(AlignmentMatrix::FromDirections(raw), rho,
                       Normalize(prev.segment(span.offset, span.length)))
              .direction;
    }
    CHECK(BitwiseEqual(g, expected));
    REQUIRE(diag.layers.size() == 2);
    CHECK(diag.full_rank());
    CHECK(diag.residual_norm() < 1e-10);
    CHECK(diag.active_clients == std::vector<int>{0, 1});
  }

  SUBCASE("zero reference slice degrades to the zero-reference solve") {
    std::mt19937_64 rng(21);
    const auto updates = RandomUpdates(rng, 3, 10);
    AggregatorState a, b;
    a.kind = b.kind = AggregatorKind::kCraft;
    b.round = 5;
    b.prev_update = Eigen::VectorXd::Zero(10);
    const auto layout = LayerLayout::Single(10);
    CHECK(BitwiseEqual(CraftAggregate(updates, a, layout, opt),
                       CraftAggregate(updates, b, layout, opt)));
  }

  SUBCASE("errors name the client") {
    std::vector<ClientUpdate> u(2);
    u[0] = {4, 1.0, Vec({1, 0})};
    u[1] = {9, 1.0, Vec({1, NAN})};
    AggregatorState s;
    try {
      CraftAggregate(u, s, LayerLayout::Single(2), opt);
      FAIL("expected an exception");
    } catch (const InvalidInputError& e) {
      CHECK(std::string(e.what()).find("client 9") != std::string::npos);
    }
    u[1] = {7, 1.0, Vec({1, 0, 0})};
    CHECK_THROWS_AS(CraftAggregate(u, s, LayerLayout::Single(2), opt), InvalidInputError);
  }
}

TEST_CASE("CRAFT never conflicts with active clients at full rank") {
  std::mt19937_64 rng(99);
  const LayerLayout layout = LayerLayout::FromLengths({30, 5, 20, 4});
  AggregatorState s;
  s.kind = AggregatorKind::kCraft;
  for (int round = 0; round < 30; ++round) {
    const auto updates = RandomUpdates(rng, 4, 59);
    AggregationDiagnostics diag;
    const Eigen::VectorXd g = CraftAggregate(updates, s, layout, CraftOptions{}, &diag);
    REQUIRE(diag.full_rank());
    CHECK(CountConflicts(updates, g, diag.active_clients) == 0);
    CHECK(diag.residual_norm() < 1e-8);
  }
}

TEST_CASE("CRAFT falls back to FedAvg when every layer is gated") {
  std::mt19937_64 rng(4);
  const auto updates = RandomUpdates(rng, 5, 12);
  CraftOptions opt;
  opt.tau = 1e6;
  AggregatorState s;
  AggregationDiagnostics diag;
  const Eigen::VectorXd g =
      CraftAggregate(updates, s, LayerLayout::FromLengths({7, 5}), opt, &diag);
  CHECK(BitwiseEqual(g, FedAvgAggregate(updates)));
  CHECK(diag.layers[0].active_count == 0);
  CHECK(diag.active_clients.empty());
}

TEST_CASE("Permuting layers and permuting back is bitwise neutral") {
  std::mt19937_64 rng(12);
  const std::vector<std::size_t> lengths{6, 3, 8};
  const std::vector<int> perm{2, 0, 1};
  const auto updates = RandomUpdates(rng, 3, 17);
  const Eigen::VectorXd prev = RandomUpdates(rng, 1, 17)[0].delta;

  auto offsets = [](const std::vector<std::size_t>& lens) {
    std::vector<std::size_t> off(lens.size(), 0);
    for (std::size_t q = 1; q < lens.size(); ++q) off[q] = off[q - 1] + lens[q - 1];
    return off;
  };
  const auto off = offsets(lengths);
  std::vector<std::size_t> plens;
  for (int q : perm) plens.push_back(lengths[q]);
  const auto poff = offsets(plens);
  auto permute = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd out(v.size());
    for (std::size_t k = 0; k < perm.size(); ++k)
      out.segment(poff[k], plens[k]) = v.segment(off[perm[k]], lengths[perm[k]]);
    return out;
  };
  auto unpermute = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd out(v.size());
    for (std::size_t k = 0; k < perm.size(); ++k)
      out.segment(off[perm[k]], lengths[perm[k]]) = v.segment(poff[k], plens[k]);
    return out;
  };

  AggregatorState a, b;
  a.kind = b.kind = AggregatorKind::kCraft;
  a.round = b.round = 1;
  a.prev_update = prev;
  b.prev_update = permute(prev);
  std::vector<ClientUpdate> permuted = updates;
  for (auto& u : permuted) u.delta = permute(u.delta);

  const Eigen::VectorXd ga =
      CraftAggregate(updates, a, LayerLayout::FromLengths(lengths), CraftOptions{});
  const Eigen::VectorXd gb =
      CraftAggregate(permuted, b, LayerLayout::FromLengths(plens), CraftOptions{});
  CHECK(BitwiseEqual(ga, unpermute(gb)));
}

TEST_CASE("Aggregator interface is uniform") {
  std::mt19937_64 rng(6);
  const LayerLayout layout = LayerLayout::FromLengths({4, 4});
  const auto updates = RandomUpdates(rng, 3, 8);
  for (AggregatorKind kind :
       {AggregatorKind::kFedAvg, AggregatorKind::kFedProx, AggregatorKind::kFedNova,
        AggregatorKind::kFedAvgM, AggregatorKind::kFedAdagrad, AggregatorKind::kFedAdam,
        AggregatorKind::kFedYogi, AggregatorKind::kConfig, AggregatorKind::kCraft}) {
    auto agg = MakeAggregator(kind, AggregatorOptions{});
    CHECK(agg->kind() == kind);
    CHECK(ParseAggregatorKind(AggregatorName(kind)) == kind);
    AggregationDiagnostics diag;
    const Eigen::VectorXd g = agg->Aggregate(updates, layout, &diag);
    CHECK(g.size() == 8);
    CHECK(g.allFinite());
    CHECK(agg->state().round == 1);
    CHECK(agg->state().prev_update.has_value() == (kind == AggregatorKind::kCraft));
  }
  CHECK_THROWS_AS(ParseAggregatorKind("qffedavg"), InvalidInputError);
}

}  // namespace
}  // namespace craft
