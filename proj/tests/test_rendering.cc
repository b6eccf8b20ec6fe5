#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <numbers>

#include "test_util.h"
#include "zeroforge/camera.h"
#include "zeroforge/errors.h"
#include "zeroforge/objectives.h"
#include "zeroforge/renderer.h"
#include "zeroforge/toy_encoder.h"

namespace zeroforge {
namespace {

using std::numbers::pi;

// Independent slab test against an axis-aligned cube [-h, h]^3. Returns the
// chord length (0 on a miss).
double ChordThroughCube(const Vec3& o, const Vec3& d, double h) {
  double t0 = -1e300, t1 = 1e300;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-300) {
      if (std::abs(o[a]) > h) return 0.0;
      continue;
    }
    double ta = (-h - o[a]) / d[a], tb = (h - o[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  return t1 > t0 ? t1 - t0 : 0.0;
}

TEST(Camera, InverseCdfAtMedian) {
  const CameraPose p = PoseFromUniforms(0.5, 0.5);
  EXPECT_DOUBLE_EQ(p.azimuth, pi);
  EXPECT_DOUBLE_EQ(p.polar, pi / 2);
  EXPECT_DOUBLE_EQ(p.radius, 2.2);
}

TEST(Camera, SameSeedSamePoses) {
  auto a = MakeStream(3, 9, Stream::kCamera);
  auto b = MakeStream(3, 9, Stream::kCamera);
  for (int i = 0; i < 100; ++i) {
    const CameraPose x = SampleCamera(a), y = SampleCamera(b);
    EXPECT_EQ(x.azimuth, y.azimuth);
    EXPECT_EQ(x.polar, y.polar);
    EXPECT_NO_THROW(x.Validate());
  }
}

TEST(Camera, CosPolarIsUniform) {
  auto rng = MakeStream(0, 0, Stream::kCamera);
  const int n = 100000, bins = 20;
  std::vector<int> counts(bins, 0);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double c = std::cos(SampleCamera(rng).polar);
    sum += c;
    counts[std::min(bins - 1, static_cast<int>((c + 1.0) / 2.0 * bins))]++;
  }
  const double expected = static_cast<double>(n) / bins;
  double chi2 = 0.0;
  for (int k : counts) chi2 += (k - expected) * (k - expected) / expected;
  const boost::math::chi_squared dist(bins - 1);
  EXPECT_GT(boost::math::cdf(boost::math::complement(dist, chi2)), 0.01) << "chi2 = " << chi2;
  // Var(cos polar) = 1/3 for a uniform direction.
  EXPECT_LT(std::abs(sum / n), 3.0 * std::sqrt(1.0 / 3.0 / n));
}

TEST(Camera, RejectsBadPoses) {
  EXPECT_THROW((CameraPose{0.0, 0.0, 1.5}.Validate()), DomainError);
  EXPECT_THROW((CameraPose{-0.1, 0.0, 2.2}.Validate()), DomainError);
  EXPECT_THROW((CameraPose{0.0, 3.5, 2.2}.Validate()), DomainError);
}

TEST(Camera, FrameIsOrthonormalAndLooksAtOrigin) {
  for (double polar : {0.0, 0.4, pi / 2, pi}) {
    const CameraFrame f = CameraFrame::FromPose({1.1, polar, 2.2});
    auto dot = [](const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; };
    EXPECT_NEAR(dot(f.forward, f.forward), 1.0, 1e-12);
    EXPECT_NEAR(dot(f.right, f.up), 0.0, 1e-12);
    EXPECT_NEAR(dot(f.forward, f.up), 0.0, 1e-12);
    EXPECT_NEAR(dot(f.eye, f.forward), -2.2, 1e-12);
  }
}

TEST(Render, EmptyGridShowsBackground) {
  for (double bg : {0.0, 0.3, 1.0}) {
    RenderConfig rc;
    rc.image_size = 16;
    rc.background = bg;
    const Image img = Render(VoxelGrid(8), CameraPose{0.7, 1.2}, rc);
    for (double v : img.data) EXPECT_EQ(v, bg);
  }
}

TEST(Render, FullGridSaturatesInsideTheCube) {
  const int n = 16;
  RenderConfig rc;
  rc.image_size = 48;
  const CameraPose pose{0.6, 1.1};
  const Image img = Render(VoxelGrid(n, 1.0), pose, rc);
  const CameraFrame f = CameraFrame::FromPose(pose);
  int checked = 0;
  for (int r = 0; r < rc.image_size; ++r)
    for (int c = 0; c < rc.image_size; ++c) {
      const double chord = ChordThroughCube(f.eye, f.RayDirection(r, c, rc.image_size), 1.0);
      if (chord == 0.0) {
        EXPECT_EQ(img.at(0, r, c), 0.0);
      } else if (chord * n / 2.0 >= 6.0) {
        EXPECT_GE(img.at(0, r, c), 0.99) << r << "," << c;
        ++checked;
      }
    }
  EXPECT_GT(checked, 100);
}

TEST(Render, SingleCenterVoxelProjectsToTheCenter) {
  const int n = 15;
  VoxelGrid g(n);
  g.at(7, 7, 7) = 1.0;
  RenderConfig rc;
  rc.image_size = 64;
  rc.steps_per_ray = 8 * n;
  const CameraPose pose{2.0, 0.9};
  const Image img = Render(g, pose, rc);
  const CameraFrame f = CameraFrame::FromPose(pose);
  const double edge = 2.0 / n;
  double wsum = 0.0, rsum = 0.0, csum = 0.0;
  for (int r = 0; r < rc.image_size; ++r)
    for (int c = 0; c < rc.image_size; ++c) {
      const double v = img.at(0, r, c);
      const Vec3 d = f.RayDirection(r, c, rc.image_size);
      // Trilinear support of the voxel spans one edge around its center.
      if (v > 0.0) EXPECT_GT(ChordThroughCube(f.eye, d, edge), 0.0) << r << "," << c;
      if (ChordThroughCube(f.eye, d, 0.5 * edge) > 0.25 * edge) EXPECT_GT(v, 0.0) << r << "," << c;
      wsum += v;
      rsum += v * r;
      csum += v * c;
      EXPECT_EQ(img.at(1, r, c), v);
      EXPECT_EQ(img.at(2, r, c), v);
    }
  ASSERT_GT(wsum, 0.0);
  const double center = (rc.image_size - 1) / 2.0;
  EXPECT_LT(std::hypot(rsum / wsum - center, csum / wsum - center), 2.0);
}

TEST(Render, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(12);
  VoxelGrid g(8);
  for (double& v : g.values) v = 0.1 + 0.8 * UniformUnit(rng);
  RenderConfig rc;
  rc.image_size = 16;
  rc.background = 0.2;
  const CameraPose pose{0.9, 1.3};
  Image w(16);
  for (double& v : w.data) v = StandardNormal(rng);
  auto summary = [&](const VoxelGrid& grid) {
    const Image img = Render(grid, pose, rc);
    double s = 0.0;
    for (size_t i = 0; i < img.data.size(); ++i) s += w.data[i] * img.data[i];
    return s;
  };
  const VoxelGrid grad = RenderBackward(g, pose, rc, w);
  double worst = 0.0;
  VoxelGrid p = g;
  for (size_t i = 0; i < g.size(); ++i) {
    auto f = [&](double x) {
      p.values[i] = x;
      const double s = summary(p);
      p.values[i] = g.values[i];
      return s;
    };
    worst = std::max(worst, testing::RelErr(grad.values[i], testing::CentralDifference(f, g.values[i], 1e-5), 1e-7));
  }
  EXPECT_LT(worst, 1e-3);
}

TEST(Render, MonotoneInEveryVoxel) {
  std::mt19937_64 rng(13);
  VoxelGrid g(6);
  for (double& v : g.values) v = 0.5 * UniformUnit(rng);
  RenderConfig rc;
  rc.image_size = 20;
  const CameraPose pose{4.0, 2.0};
  const Image base = Render(g, pose, rc);
  for (int trial = 0; trial < 20; ++trial) {
    VoxelGrid h = g;
    h.values[rng() % h.size()] += 0.4;
    const Image img = Render(h, pose, rc);
    for (size_t i = 0; i < img.data.size(); ++i) EXPECT_GE(img.data[i], base.data[i]);
  }
}

TEST(Render, HalfTurnSymmetricGridLooksTheSameFromOppositeSide) {
  const int n = 10;
  VoxelGrid g(n);
  std::mt19937_64 rng(14);
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y)
      for (int z = 0; z < n; ++z) {
        if (g.at(x, y, z) != 0.0) continue;
        const double v = UniformUnit(rng) < 0.3 ? UniformUnit(rng) : 0.0;
        g.at(x, y, z) = v;
        g.at(n - 1 - x, y, n - 1 - z) = v;
      }
  RenderConfig rc;
  rc.image_size = 24;
  const double az = 0.8, polar = 1.0;
  const Image a = Render(g, CameraPose{az, polar}, rc);
  const Image b = Render(g, CameraPose{az + pi, polar}, rc);
  double worst = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) worst = std::max(worst, std::abs(a.data[i] - b.data[i]));
  EXPECT_LT(worst, 1e-4);
}

TEST(Render, RejectsValuesOutsideUnitInterval) {
  VoxelGrid g(4, 0.5);
  g.values[3] = 1.5;
  EXPECT_THROW(Render(g, CameraPose{}, RenderConfig{}), DomainError);
  g.values[3] = -0.01;
  EXPECT_THROW(Render(g, CameraPose{}, RenderConfig{}), DomainError);
}

TEST(Render, DefaultStepsAreTwiceTheResolution) {
  RenderConfig rc;
  EXPECT_EQ(rc.StepsFor(16), 32);
  rc.steps_per_ray = 50;
  EXPECT_EQ(rc.StepsFor(16), 50);
  EXPECT_EQ(RenderConfig{}.image_size, 224);
  EXPECT_EQ(RenderConfig{}.background, 0.0);
}

TEST(Resize, IdentityWhenSizeUnchanged) {
  std::mt19937_64 rng(15);
  Image img(224);
  for (double& v : img.data) v = UniformUnit(rng);
  EXPECT_EQ(ResizeBilinear(img, 224).data, img.data);
}

TEST(Resize, ConstantStaysConstant) {
  const Image out = ResizeBilinear(Image(7, 0.37), 19);
  for (double v : out.data) EXPECT_NEAR(v, 0.37, 1e-15);
}

TEST(Resize, CheckerboardUpscaleMatchesHandWeights) {
  Image img(2);
  for (int ch = 0; ch < 3; ++ch) {
    img.at(ch, 0, 0) = 1.0;
    img.at(ch, 1, 1) = 1.0;
  }
  // Half-pixel centers map output i to source i/2 - 1/4, clamped to [0, 1]:
  // weights on source pixel 1 are 0, 1/4, 3/4, 1.
  const double w1[4] = {0.0, 0.25, 0.75, 1.0};
  const Image out = ResizeBilinear(img, 4);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) {
      const double expected = (1 - w1[r]) * (1 - w1[c]) + w1[r] * w1[c];
      for (int ch = 0; ch < 3; ++ch) EXPECT_DOUBLE_EQ(out.at(ch, r, c), expected) << r << "," << c;
    }
}

TEST(Resize, BackwardIsTheAdjoint) {
  std::mt19937_64 rng(16);
  for (auto [from, to] : {std::pair{16, 32}, std::pair{40, 32}, std::pair{224, 32}}) {
    Image x(from), y(to);
    for (double& v : x.data) v = StandardNormal(rng);
    for (double& v : y.data) v = StandardNormal(rng);
    const Image rx = ResizeBilinear(x, to);
    const Image rty = ResizeBilinearBackward(y, from);
    double a = 0.0, b = 0.0;
    for (size_t i = 0; i < rx.data.size(); ++i) a += rx.data[i] * y.data[i];
    for (size_t i = 0; i < x.data.size(); ++i) b += x.data[i] * rty.data[i];
    EXPECT_LT(testing::RelErr(a, b), 1e-12);
  }
}

class ConstantPlugin final : public RendererPlugin {
 public:
  std::string name() const override { return "constant"; }
  int output_resolution() const override { return 32; }
  Image Render(const VoxelGrid&, const CameraPose&) const override { return Image(32, 0.4); }
  VoxelGrid Backward(const VoxelGrid& g, const CameraPose&, const Image&) const override {
    return VoxelGrid(g.resolution);
  }
};

TEST(RendererPlugin, BuiltinDelegatesExactly) {
  RenderConfig rc;
  rc.image_size = 20;
  std::mt19937_64 rng(17);
  VoxelGrid g(6);
  for (double& v : g.values) v = UniformUnit(rng);
  const CameraPose pose{1.0, 2.0};
  auto plugin = MakeRendererPlugin("builtin", "", rc);
  EXPECT_EQ(plugin->output_resolution(), 20);
  EXPECT_EQ(RenderExternal(g, pose, plugin.get()).data, Render(g, pose, rc).data);
}

TEST(RendererPlugin, MissingPluginIsAConfigError) {
  try {
    RenderExternal(VoxelGrid(4), CameraPose{}, nullptr);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("builtin"), std::string::npos);
  }
  EXPECT_THROW(MakeRendererPlugin("nvr-unregistered", "", RenderConfig{}), ConfigError);
}

TEST(RendererPlugin, RegistryAcceptsExternalRenderers) {
  RegisterRendererPlugin("constant-test", [](const std::string&, const RenderConfig&) {
    return std::unique_ptr<RendererPlugin>(new ConstantPlugin);
  });
  const auto names = RegisteredRendererPlugins();
  EXPECT_NE(std::find(names.begin(), names.end(), "builtin"), names.end());
  EXPECT_NE(std::find(names.begin(), names.end(), "constant-test"), names.end());
  EXPECT_EQ(MakeRendererPlugin("constant-test", "", RenderConfig{})->name(), "constant");
}

TEST(RendererPlugin, PoseIndependentImagesMakeSimilarityPoseInvariant) {
  ConstantPlugin plugin;
  ToyEncoder enc(0, 64, 32);
  const std::vector<std::string> p{"a mug"};
  const EmbeddingBatch text = enc.EncodeText(p);
  auto rng = MakeStream(1, 0, Stream::kCamera);
  double first = 0.0;
  for (int i = 0; i < 10; ++i) {
    const std::vector<Image> imgs{RenderExternal(VoxelGrid(8), SampleCamera(rng), &plugin)};
    const double loss = SimilarityLoss(enc.EncodeImage(imgs), text);
    if (i == 0) first = loss;
    EXPECT_EQ(loss, first);
  }
}

}  // namespace
}  // namespace zeroforge
