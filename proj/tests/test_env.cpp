#include <doctest.h>

#include <algorithm>

#include "omar/env.hpp"
#include "omar/errors.hpp"

using namespace omar;
using env::EnvConfig;
using env::EnvState;
using env::EnvVariant;

namespace {

EnvConfig spread(int n, EnvVariant variant = EnvVariant::kSpread1dCoop) {
  EnvConfig c;
  c.variant = variant;
  c.n_agents = n;
  return c;
}

std::vector<Eigen::VectorXd> const_actions(const EnvConfig& c, double v) {
  std::vector<Eigen::VectorXd> a(static_cast<std::size_t>(c.n_agents));
  for (auto& x : a) x = Eigen::VectorXd::Constant(c.action_dim(), v);
  return a;
}

}  // namespace

TEST_CASE("reset is deterministic per seed") {
  const auto c = spread(3);
  auto [s1, o1] = env::reset(c, 99);
  auto [s2, o2] = env::reset(c, 99);
  CHECK((s1.agent_pos - s2.agent_pos).cwiseAbs().maxCoeff() == 0.0);
  CHECK((s1.landmark_pos - s2.landmark_pos).cwiseAbs().maxCoeff() == 0.0);
  for (std::size_t i = 0; i < o1.size(); ++i)
    CHECK((o1[i] - o2[i]).cwiseAbs().maxCoeff() == 0.0);
  auto [s3, o3] = env::reset(c, 100);
  CHECK((s1.agent_pos - s3.agent_pos).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("reset with one agent yields one agent and one landmark") {
  auto [state, obs] = env::reset(spread(1), 0);
  CHECK(state.agent_pos.cols() == 1);
  CHECK(state.landmark_pos.cols() == 1);
  CHECK(obs.size() == 1);
}

TEST_CASE("1000 resets stay inside the world box") {
  for (const auto variant :
       {EnvVariant::kSpread1dCoop, EnvVariant::kCoopNav2d}) {
    const auto c = spread(3, variant);
    auto [state, obs] = env::reset(c, 5);
    for (int i = 0; i < 1000; ++i) {
      env::reset_next(c, state);
      CHECK(state.agent_pos.cwiseAbs().maxCoeff() <= c.world_halfwidth);
      CHECK(state.landmark_pos.cwiseAbs().maxCoeff() <= c.world_halfwidth);
    }
  }
}

TEST_CASE("agents on distinct landmarks with no collision score zero") {
  const auto c = spread(2);
  auto [state, obs] = env::reset(c, 1);
  state.agent_pos(0, 0) = -0.5;
  state.agent_pos(0, 1) = 0.5;
  state.landmark_pos(0, 0) = -0.5;
  state.landmark_pos(0, 1) = 0.5;
  const auto r = env::compute_rewards(c, state);
  CHECK(r(0) == 0.0);
  CHECK(r(1) == 0.0);
}

TEST_CASE("single-agent 1-D transition and reward hand evaluation") {
  auto c = spread(1);
  c.dt = 0.1;
  c.max_speed = 1.0;
  auto [state, obs] = env::reset(c, 2);
  state.agent_pos(0, 0) = 0.0;
  state.landmark_pos(0, 0) = 0.5;
  std::vector<Eigen::VectorXd> act{Eigen::VectorXd::Constant(1, 1.0)};
  const auto res = env::step(c, state, act);
  CHECK(state.agent_pos(0, 0) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(res.rewards(0) == doctest::Approx(-0.4).epsilon(1e-12));
}

TEST_CASE("coincident agents pay the collision penalty exactly once") {
  const auto c = spread(2);
  auto [state, obs] = env::reset(c, 3);
  state.agent_pos.setZero();
  state.landmark_pos(0, 0) = 0.0;
  state.landmark_pos(0, 1) = 0.0;
  // both landmarks covered at distance zero; one colliding pair remains
  const auto r = env::compute_rewards(c, state);
  CHECK(r(0) == doctest::Approx(-c.collision_penalty).epsilon(1e-12));
}

TEST_CASE("out-of-range actions clamp, or throw in strict mode") {
  auto c = spread(1);
  auto [state, obs] = env::reset(c, 4);
  state.agent_pos(0, 0) = 0.0;
  std::vector<Eigen::VectorXd> act{Eigen::VectorXd::Constant(1, 8.0)};
  env::step(c, state, act);
  CHECK(state.agent_pos(0, 0) == doctest::Approx(c.dt * c.max_speed));

  c.strict_actions = true;
  auto [strict_state, strict_obs] = env::reset(c, 4);
  CHECK_THROWS_AS(env::step(c, strict_state, act), ContractError);
}

TEST_CASE("observation layout: origin agent sees absolute landmarks") {
  const auto c = spread(2);
  auto [state, obs] = env::reset(c, 6);
  state.agent_pos(0, 0) = 0.0;
  const auto o = env::observe(c, state, 0);
  CHECK(o(0) == 0.0);
  CHECK(o(1) == doctest::Approx(state.landmark_pos(0, 0)));
  CHECK(o(2) == doctest::Approx(state.landmark_pos(0, 1)));
  CHECK(o(3) == doctest::Approx(state.agent_pos(0, 1)));
}

TEST_CASE("relative observation components are translation invariant") {
  const auto c = spread(3);
  auto [state, obs] = env::reset(c, 7);
  // keep the shift inside the box so no clamping interferes
  state.agent_pos.setConstant(-0.2);
  state.agent_pos(0, 1) = 0.1;
  state.agent_pos(0, 2) = 0.3;
  state.landmark_pos.setConstant(0.2);
  state.landmark_pos(0, 1) = -0.1;
  const auto before = env::observe(c, state, 1);
  EnvState shifted = state;
  shifted.agent_pos.array() += 0.4;
  shifted.landmark_pos.array() += 0.4;
  const auto after = env::observe(c, shifted, 1);
  // component 0 is the absolute own position; the rest are relative
  CHECK((after.tail(after.size() - 1) - before.tail(before.size() - 1))
            .cwiseAbs()
            .maxCoeff() <= 1e-12);
}

TEST_CASE("observation length follows the documented layout") {
  for (int n = 1; n <= 5; ++n) {
    CHECK(spread(n).obs_dim() == 2 * n);
    CHECK(spread(n, EnvVariant::kCoopNav2d).obs_dim() == 4 * n + 2);
    auto [state, obs] = env::reset(spread(n), 8);
    CHECK(obs[0].size() == 2 * n);
  }
}

TEST_CASE("cooperative rewards are shared exactly") {
  for (const auto variant :
       {EnvVariant::kSpread1dCoop, EnvVariant::kCoopNav2d}) {
    const auto c = spread(4, variant);
    auto [state, obs] = env::reset(c, 9);
    Rng rng(10);
    for (int t = 0; t < 25; ++t) {
      std::vector<Eigen::VectorXd> act(4);
      for (auto& a : act) {
        a.resize(c.action_dim());
        for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = rng.uniform(-1.0, 1.0);
      }
      const auto res = env::step(c, state, act);
      CHECK((res.rewards.array() - res.rewards(0)).abs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("permuting agents permutes independent rewards, keeps shared reward") {
  const auto indep = spread(3, EnvVariant::kSpread1dIndependent);
  auto [state, obs] = env::reset(indep, 11);
  const auto r = env::compute_rewards(indep, state);

  // swap agents 0 and 2 together with their landmarks
  EnvState perm = state;
  perm.agent_pos.col(0).swap(perm.agent_pos.col(2));
  perm.landmark_pos.col(0).swap(perm.landmark_pos.col(2));
  const auto rp = env::compute_rewards(indep, perm);
  CHECK(rp(0) == doctest::Approx(r(2)).epsilon(1e-12));
  CHECK(rp(2) == doctest::Approx(r(0)).epsilon(1e-12));
  CHECK(rp(1) == doctest::Approx(r(1)).epsilon(1e-12));

  const auto coop = spread(3);
  auto [cs, co] = env::reset(coop, 12);
  EnvState cperm = cs;
  cperm.agent_pos.col(0).swap(cperm.agent_pos.col(1));
  CHECK(env::compute_rewards(coop, cperm)(0) ==
        doctest::Approx(env::compute_rewards(coop, cs)(0)).epsilon(1e-12));
}

TEST_CASE("episodes terminate at exactly episode_len") {
  auto c = spread(2);
  c.episode_len = 7;
  auto [state, obs] = env::reset(c, 13);
  for (int t = 1; t <= 7; ++t) {
    const auto res = env::step(c, state, const_actions(c, 0.1));
    CHECK(res.done == (t == 7));
  }
  CHECK_THROWS_AS(env::step(c, state, const_actions(c, 0.1)), ContractError);
}

TEST_CASE("cooperative reward is never positive") {
  const auto c = spread(3);
  auto [state, obs] = env::reset(c, 14);
  Rng rng(15);
  for (int ep = 0; ep < 20; ++ep) {
    env::reset_next(c, state);
    for (int t = 0; t < c.episode_len; ++t) {
      std::vector<Eigen::VectorXd> act(3);
      for (auto& a : act) a = Eigen::VectorXd::Constant(1, rng.uniform(-1.0, 1.0));
      const auto res = env::step(c, state, act);
      CHECK(res.rewards(0) <= 0.0);
    }
  }
}

TEST_CASE("independent variant rewards ignore collisions") {
  const auto c = spread(2, EnvVariant::kSpread1dIndependent);
  auto [state, obs] = env::reset(c, 16);
  state.agent_pos.setZero();  // coincident agents
  state.landmark_pos(0, 0) = 0.25;
  state.landmark_pos(0, 1) = -0.75;
  const auto r = env::compute_rewards(c, state);
  CHECK(r(0) == doctest::Approx(-0.25).epsilon(1e-12));
  CHECK(r(1) == doctest::Approx(-0.75).epsilon(1e-12));
}

TEST_CASE("2-D dynamics clamp position and cap speed") {
  auto c = spread(1, EnvVariant::kCoopNav2d);
  c.max_speed = 0.5;
  auto [state, obs] = env::reset(c, 17);
  state.agent_pos.col(0) << 0.9, 0.9;
  for (int t = 0; t < c.episode_len; ++t) {
    env::step(c, state, const_actions(c, 1.0));
    CHECK(state.agent_pos.cwiseAbs().maxCoeff() <= c.world_halfwidth);
    CHECK(state.agent_vel.col(0).norm() <= c.max_speed + 1e-12);
    if (state.timestep == c.episode_len) break;
  }
}
