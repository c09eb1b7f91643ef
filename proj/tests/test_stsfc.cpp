#include "sando/stsfc.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

using namespace sando;

namespace {

// Monte-Carlo volume of a polytope inside a sampling box.
double mc_volume(const Polytope& p, const Aabb& box, int samples = 20000) {
  std::mt19937 rng(123);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int in = 0;
  for (int i = 0; i < samples; ++i) {
    const Vec3 q = box.center + box.half_extents.cwiseProduct(Vec3(u(rng), u(rng), u(rng)));
    in += p.contains(q);
  }
  return 8.0 * box.half_extents.prod() * in / samples;
}

GlobalPath straight(const Vec3& a, const Vec3& b) { return GlobalPath{{a, b}}; }

}  // namespace

TEST(ReachableRadius, Substitution) {
  CorridorParams p;
  p.v_obs_max = 0.5;
  EXPECT_DOUBLE_EQ(reachable_radius(0, 0.5, p), 0.25);
  EXPECT_DOUBLE_EQ(reachable_radius(4, 0.5, p), 1.25);
  p.v_obs_max = 0.0;
  p.epsilon = 0.1;
  for (int n = 0; n < 6; ++n) EXPECT_DOUBLE_EQ(reachable_radius(n, 0.3, p), 0.1);
  EXPECT_THROW(reachable_radius(-1, 0.5, p), std::invalid_argument);
  EXPECT_THROW(reachable_radius(0, 0.0, p), std::invalid_argument);
}

TEST(ReachableRadius, StrictlyIncreasing) {
  CorridorParams p;
  for (int n = 0; n < 10; ++n) EXPECT_LT(reachable_radius(n, 0.2, p), reachable_radius(n + 1, 0.2, p));
}

TEST(LayerRadius, WorstCaseUsesFullHorizon) {
  CorridorParams p;
  p.mode = SfcMode::WorstCase;
  for (int n = 0; n < 5; ++n) EXPECT_DOUBLE_EQ(layer_radius(n, 5, 0.4, p), 0.5 * 5 * 0.4);
  p.mode = SfcMode::Stsfc;
  EXPECT_DOUBLE_EQ(layer_radius(2, 5, 0.4, p), 0.5 * 3 * 0.4);
}

TEST(InflateLayerObstacles, Componentwise) {
  CorridorParams p;
  EXPECT_TRUE(inflate_layer_obstacles({}, 0, 0.5, p).empty());
  const std::vector<Aabb> tracks = {Aabb(Vec3(1, 2, 3), Vec3::Constant(0.4))};
  const auto l0 = inflate_layer_obstacles(tracks, 0, 0.5, p);
  const auto l1 = inflate_layer_obstacles(tracks, 1, 0.5, p);
  EXPECT_TRUE(l0[0].half_extents.isApprox(Vec3::Constant(0.65), 1e-15));
  EXPECT_TRUE((l1[0].half_extents - l0[0].half_extents).isApprox(Vec3::Constant(0.25), 1e-12));
}

TEST(InflateLayerUnknown, Cases) {
  CorridorParams p;
  const VoxelGrid free(Vec3::Zero(), 0.1, Index3(8, 8, 8));
  EXPECT_TRUE(inflate_layer_unknown(free, 3, 0.5, p).empty());

  VoxelGrid g(Vec3::Zero(), 0.1, Index3(8, 8, 8));
  for (int z = 0; z < 3; ++z) g.set(Index3(1, 1, z), Cell::Unknown);
  p.v_obs_max = 0.0;
  p.epsilon = 0.0;
  std::set<std::size_t> got, want;
  for (const auto& i : inflate_layer_unknown(g, 2, 0.5, p)) got.insert(g.linear(i));
  for (int z = 0; z < 3; ++z) want.insert(g.linear(Index3(1, 1, z)));
  EXPECT_EQ(got, want);
}

TEST(InflateLayerUnknown, SingleVoxelHaloMatchesBruteForce) {
  VoxelGrid g(Vec3::Zero(), 0.1, Index3(7, 7, 7));
  g.set(Index3(3, 3, 3), Cell::Unknown);
  CorridorParams p;
  p.v_obs_max = 0.0;
  p.epsilon = 0.1;  // one voxel
  std::set<std::size_t> got, want;
  for (const auto& i : inflate_layer_unknown(g, 0, 0.5, p)) got.insert(g.linear(i));
  for (std::size_t li = 0; li < g.size(); ++li) {
    if ((g.unlinear(li) - Index3(3, 3, 3)).cwiseAbs().maxCoeff() <= 1) want.insert(li);
  }
  EXPECT_EQ(got, want);
}

TEST(Decompose, ObstacleFreeGivesBounds) {
  const Aabb bounds = Aabb::from_corners(Vec3(-1, -1, -1), Vec3(3, 1, 1));
  const auto r = decompose_segment({}, Vec3::Zero(), Vec3(2, 0, 0), bounds, CorridorParams{});
  ASSERT_TRUE(r.polytope);
  EXPECT_EQ(r.polytope->size(), 6u);
}

TEST(Decompose, ExcludesNearbyObstacleKeepsEndpoints) {
  const Aabb bounds = Aabb::from_corners(Vec3(-1, -2, -2), Vec3(3, 2, 2));
  const Aabb obs(Vec3(1, 0.5, 0), Vec3::Constant(0.1));
  const auto r = decompose_segment({obs}, Vec3::Zero(), Vec3(2, 0, 0), bounds, CorridorParams{});
  ASSERT_TRUE(r.polytope);
  EXPECT_TRUE(polytope_disjoint_from_aabb(*r.polytope, obs));
  EXPECT_TRUE(r.polytope->contains(Vec3::Zero()));
  EXPECT_TRUE(r.polytope->contains(Vec3(2, 0, 0)));
  EXPECT_FALSE(r.polytope->contains(obs.center));
}

TEST(Decompose, MidpointInsideObstacleFails) {
  const Aabb bounds = Aabb::from_corners(Vec3(-1, -2, -2), Vec3(3, 2, 2));
  const auto r = decompose_segment({Aabb(Vec3(1, 0, 0), Vec3::Constant(0.2))}, Vec3::Zero(), Vec3(2, 0, 0),
                                   bounds, CorridorParams{});
  EXPECT_EQ(r.status, DecompStatus::SeedInCollision);
  EXPECT_FALSE(r.polytope);
}

TEST(Decompose, HalfspaceCap) {
  CorridorParams p;
  p.max_halfspaces = 7;
  const Aabb bounds = Aabb::from_corners(Vec3(-1, -2, -2), Vec3(3, 2, 2));
  const std::vector<Aabb> obs = {Aabb(Vec3(1, 0.6, 0), Vec3::Constant(0.1)),
                                 Aabb(Vec3(1, -0.6, 0), Vec3::Constant(0.1))};
  EXPECT_EQ(decompose_segment(obs, Vec3::Zero(), Vec3(2, 0, 0), bounds, p).status,
            DecompStatus::TooManyHalfspaces);
}

TEST(Decompose, RandomObstaclesAlwaysSeparated) {
  std::mt19937 rng(21);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Aabb bounds = Aabb::from_corners(Vec3(-2, -2, -2), Vec3(4, 2, 2));
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Aabb> obs;
    for (int i = 0; i < 15; ++i) {
      obs.emplace_back(Vec3(1 + 2.5 * u(rng), 1.8 * u(rng), 1.8 * u(rng)), Vec3::Constant(0.1 + 0.1 * (u(rng) + 1)));
    }
    const Vec3 s(0, 0.3 * u(rng), 0), e(2, 0.3 * u(rng), 0);
    const auto r = decompose_segment(obs, s, e, bounds, CorridorParams{});
    if (!r.polytope) continue;
    EXPECT_TRUE(r.polytope->contains(0.5 * (s + e)));
    for (const auto& b : obs) EXPECT_TRUE(polytope_disjoint_from_aabb(*r.polytope, b)) << "trial " << trial;
  }
}

TEST(Generate, StaticWorldLayersIdentical) {
  VoxelGrid g(Vec3(-2, -3, 0), 0.2, Index3(40, 30, 20));
  for (int z = 0; z < 20; ++z) g.set(Index3(15, 18, z), Cell::Occupied);
  GlobalPath path{{Vec3(0, 0, 2), Vec3(2, 0.3, 2), Vec3(4, 0, 2)}};
  const auto sfc = generate(g, {}, path, 5, 0.3, CorridorParams{});
  ASSERT_EQ(sfc.successful_cells(), 10);
  for (int n = 1; n < 5; ++n) {
    for (int p = 0; p < 2; ++p) {
      EXPECT_EQ(sfc.at(n, p).matrix(), sfc.at(0, p).matrix());
      EXPECT_EQ(sfc.at(n, p).offsets(), sfc.at(0, p).offsets());
    }
  }
}

TEST(Generate, ZeroSpeedGivesIdenticalLayers) {
  const VoxelGrid g(Vec3(-2, -3, 0), 0.2, Index3(40, 30, 20));
  CorridorParams p;
  p.v_obs_max = 0.0;
  const std::vector<Aabb> tracks = {Aabb(Vec3(1, 1.0, 2), Vec3::Constant(0.3))};
  const auto sfc = generate(g, tracks, straight(Vec3(0, 0, 2), Vec3(3, 0, 2)), 4, 0.3, p);
  for (int n = 1; n < 4; ++n) EXPECT_EQ(sfc.at(n, 0).offsets(), sfc.at(0, 0).offsets());
}

TEST(Generate, LayersShrinkAndWorstCaseIsSmaller) {
  const VoxelGrid g(Vec3(-2, -3, 0), 0.2, Index3(40, 30, 20));
  const std::vector<Aabb> tracks = {Aabb(Vec3(1.5, 1.3, 2), Vec3::Constant(0.3))};
  const auto path = straight(Vec3(0, 0, 2), Vec3(3, 0, 2));
  CorridorParams p;
  const auto sfc = generate(g, tracks, path, 5, 0.3, p);
  ASSERT_EQ(sfc.successful_cells(), 5);
  const Aabb box = Aabb::from_corners(Vec3(-1.5, -1.5, 0.5), Vec3(4.5, 1.5, 3.5));
  const double v0 = mc_volume(sfc.at(0, 0), box);
  const double v4 = mc_volume(sfc.at(4, 0), box);
  EXPECT_GE(v0, v4);
  p.mode = SfcMode::WorstCase;
  const auto wc = generate(g, tracks, path, 5, 0.3, p);
  for (int n = 0; n < 5; ++n) EXPECT_LE(mc_volume(wc.at(n, 0), box), v0);
}

TEST(Generate, CellsDisjointFromEveryInflatedObstacle) {
  std::mt19937 rng(31);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  VoxelGrid g(Vec3(-2, -4, 0), 0.2, Index3(50, 40, 20));
  for (int i = 0; i < 6; ++i) {
    const Index3 c(10 + rng() % 30, 5 + rng() % 30, 0);
    for (int z = 0; z < 20; ++z) g.set(Index3(c.x(), c.y(), z), Cell::Occupied);
  }
  for (int x = 40; x < 50; ++x)
    for (int y = 0; y < 40; ++y)
      for (int z = 0; z < 20; ++z) g.set(Index3(x, y, z), Cell::Unknown);
  GlobalPath path{{Vec3(0, 0, 2), Vec3(2, 0.5, 2), Vec3(4, 0, 2.2), Vec3(5.5, 0, 2)}};
  std::vector<Aabb> tracks;
  for (int i = 0; i < 3; ++i) tracks.emplace_back(Vec3(2 + 2 * u(rng), 2.0 * (i - 1) + 0.3 * u(rng), 2), Vec3::Constant(0.25));
  CorridorParams p;
  const auto sfc = generate(g, tracks, path, 5, 0.25, p);
  ASSERT_GT(sfc.successful_cells(), 0);
  for (int n = 0; n < 5; ++n) {
    for (int q = 0; q < sfc.P; ++q) {
      if (!sfc.has(n, q)) continue;
      const auto& cell = sfc.at(n, q);
      for (const auto& box : sfc.layer_obstacles[static_cast<std::size_t>(n)]) {
        EXPECT_TRUE(polytope_disjoint_from_aabb(cell, minkowski_inflate(box, p.r_drone)));
      }
      // Seed containment and no static or unknown voxel center inside.
      const Vec3 mid = 0.5 * (path.waypoints[static_cast<std::size_t>(q)] + path.waypoints[static_cast<std::size_t>(q) + 1]);
      EXPECT_TRUE(cell.contains(mid));
      for (std::size_t li = 0; li < g.size(); ++li) {
        if (g.cells()[li] == Cell::Free) continue;
        EXPECT_FALSE(cell.contains(g.center(g.unlinear(li)), 0.0));
      }
    }
  }
}

TEST(Generate, RejectsBadArguments) {
  const VoxelGrid g(Vec3::Zero(), 0.2, Index3(10, 10, 10));
  EXPECT_THROW(generate(g, {}, GlobalPath{{Vec3(1, 1, 1)}}, 5, 0.3, CorridorParams{}), std::invalid_argument);
  EXPECT_THROW(generate(g, {}, straight(Vec3(1, 1, 1), Vec3(1.5, 1, 1)), 0, 0.3, CorridorParams{}),
               std::invalid_argument);
}
