#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "test_util.h"
#include "zeroforge/archive.h"
#include "zeroforge/binarization.h"
#include "zeroforge/checkpoint.h"
#include "zeroforge/config.h"
#include "zeroforge/errors.h"
#include "zeroforge/png_io.h"
#include "zeroforge/voxel_file.h"

namespace zeroforge {
namespace {

namespace fs = std::filesystem;

FlowConfig SmallFlow() {
  FlowConfig f;
  f.num_coupling_blocks = 3;
  f.hidden_width = 16;
  f.latent_dim = 8;
  f.condition_dim = 12;
  return f;
}

DecoderConfig SmallDecoder() {
  DecoderConfig d;
  d.num_blocks = 2;
  d.resolution = 16;
  d.channels = 4;
  d.latent_dim = 8;
  return d;
}

std::unique_ptr<Generator> RandomGenerator(uint64_t seed) {
  auto g = std::make_unique<Generator>(SmallFlow(), SmallDecoder());
  g->InitRandom(seed, 0.05);
  // Perturb the zero-initialized flow outputs so every array is non-trivial.
  std::mt19937_64 rng(seed + 100);
  for (Parameter* p : g->parameters())
    for (double& v : p->value) v += 0.01 * StandardNormal(rng);
  return g;
}

std::string Slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

void Spit(const fs::path& p, const std::string& bytes) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string ErrorOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

TEST(Archive, RoundTripsArraysAndMetadata) {
  testing::TempDir dir("archive");
  Archive a;
  a.metadata = {{"iteration", 42}, {"note", "hello"}};
  a.arrays["x"] = ArrayEntry{ArrayEntry::Dtype::kF64, {2, 3}, {1.0, -2.5, 3.0e-300, 0.1, 1e300, -0.0}};
  a.arrays["y"] = ArrayEntry{ArrayEntry::Dtype::kF32, {4}, {0.5, -0.25, 3.0, 1024.0}};
  a.arrays["scalar"] = ArrayEntry{ArrayEntry::Dtype::kF64, {}, {7.0}};
  WriteArchive(dir / "a.zf", a);
  const Archive b = ReadArchive(dir / "a.zf");
  EXPECT_EQ(b.metadata, a.metadata);
  ASSERT_EQ(b.arrays.size(), 3u);
  for (const auto& [name, e] : a.arrays) {
    const ArrayEntry& r = b.arrays.at(name);
    EXPECT_EQ(r.dtype, e.dtype);
    EXPECT_EQ(r.shape, e.shape);
    ASSERT_EQ(r.values.size(), e.values.size());
    EXPECT_EQ(std::memcmp(r.values.data(), e.values.data(), e.values.size() * sizeof(double)), 0) << name;
  }
  // Atomic write leaves no temporary behind.
  int files = 0;
  for (const auto& entry : fs::directory_iterator(dir.path())) {
    (void)entry;
    ++files;
  }
  EXPECT_EQ(files, 1);
}

TEST(Archive, RejectsBadMagicVersionAndTruncation) {
  testing::TempDir dir("archive-bad");
  Archive a;
  a.arrays["w"] = ArrayEntry{ArrayEntry::Dtype::kF64, {8}, std::vector<double>(8, 1.0)};
  WriteArchive(dir / "a.zf", a);
  const std::string bytes = Slurp(dir / "a.zf");

  std::string bad = bytes;
  bad[0] = 'X';
  Spit(dir / "magic.zf", bad);
  EXPECT_NE(ErrorOf([&] { ReadArchive(dir / "magic.zf"); }).find("bad magic"), std::string::npos);

  bad = bytes;
  bad[8] = 9;  // version low byte
  Spit(dir / "version.zf", bad);
  EXPECT_NE(ErrorOf([&] { ReadArchive(dir / "version.zf"); }).find("version"), std::string::npos);

  Spit(dir / "short.zf", bytes.substr(0, bytes.size() - 3));
  const std::string msg = ErrorOf([&] { ReadArchive(dir / "short.zf"); });
  EXPECT_NE(msg.find("truncated"), std::string::npos);
  EXPECT_NE(msg.find("short.zf"), std::string::npos);
  EXPECT_THROW(ReadArchive(dir / "short.zf"), FormatError);
  EXPECT_THROW(ReadArchive(dir / "missing.zf"), FormatError);
}

TEST(Checkpoint, SaveLoadIsBitwise) {
  testing::TempDir dir("ckpt");
  auto g = RandomGenerator(1);
  SaveCheckpoint(dir / "g.zf", *g, {{"iteration", 3}});
  auto h = LoadPretrained(dir / "g.zf");
  const ParameterList a = g->parameters(), b = h->parameters();
  ASSERT_EQ(a.size(), b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i]->name, b[i]->name);
    EXPECT_EQ(a[i]->shape, b[i]->shape);
    ASSERT_EQ(a[i]->value.size(), b[i]->value.size());
    EXPECT_EQ(std::memcmp(a[i]->value.data(), b[i]->value.data(), a[i]->value.size() * sizeof(double)), 0)
        << a[i]->name;
  }
  EXPECT_EQ(Checksum(a), Checksum(b));
}

TEST(Checkpoint, ZeroConvGeneratorRoundTrips) {
  testing::TempDir dir("ckpt-zc");
  auto g = RandomGenerator(2);
  g->WrapZeroConv();
  SaveCheckpoint(dir / "g.zf", *g, {});
  auto h = LoadPretrained(dir / "g.zf");
  EXPECT_TRUE(h->decoder().config().zeroconv_enabled);
  EXPECT_EQ(Checksum(g->parameters()), Checksum(h->parameters()));
}

TEST(Checkpoint, RenamedKeyIsNamedInTheError) {
  auto g = RandomGenerator(3);
  Archive a = SnapshotGenerator(*g, {});
  auto node = a.arrays.extract("decoder.blocks.1.conv0.weight");
  node.key() = "decoder.blocks.1.conv_zero.weight";
  a.arrays.insert(std::move(node));
  const std::string msg = ErrorOf([&] { LoadPretrained(a); });
  EXPECT_NE(msg.find("decoder.blocks.1.conv0.weight"), std::string::npos) << msg;
  EXPECT_NE(msg.find("decoder.blocks.1.conv_zero.weight"), std::string::npos) << msg;
  EXPECT_THROW(LoadPretrained(a), FormatError);
}

TEST(Checkpoint, ShapeMismatchIsNamed) {
  auto g = RandomGenerator(4);
  Archive a = SnapshotGenerator(*g, {});
  a.arrays["decoder.head.bias"].shape = {1, 1};
  const std::string msg = ErrorOf([&] {
    Generator h(SmallFlow(), SmallDecoder());
    LoadGeneratorParameters(h, a);
  });
  EXPECT_NE(msg.find("shape mismatch for decoder.head.bias"), std::string::npos) << msg;
}

// Builds an archive using third-party names for every base parameter.
Archive ClipForgeArchive(Generator& g) {
  const GeneratorSpec spec{g.flow().config(), g.decoder().config()};
  std::map<std::string, const Parameter*> ours;
  for (const Parameter* p : g.parameters()) ours[p->name] = p;
  Archive a;
  a.metadata = {{"format", "clip-forge"}};
  for (const auto& [theirs, mine] : ClipForgeNameTable(spec)) {
    const Parameter* p = ours.at(mine);
    a.arrays[theirs] = ArrayEntry{ArrayEntry::Dtype::kF32, p->shape, p->value};
  }
  return a;
}

TEST(ClipForgeImport, TableCoversEveryParameterExactlyOnce) {
  auto g = RandomGenerator(5);
  const GeneratorSpec spec{g->flow().config(), g->decoder().config()};
  std::set<std::string> ours, mapped, theirs;
  for (const Parameter* p : g->parameters()) ours.insert(p->name);
  for (const auto& [t, m] : ClipForgeNameTable(spec)) {
    EXPECT_TRUE(theirs.insert(t).second) << t;
    EXPECT_TRUE(mapped.insert(m).second) << m;
    EXPECT_EQ(TranslateClipForgeName(t), m);
  }
  EXPECT_EQ(mapped, ours);
}

TEST(ClipForgeImport, ConformingArchiveIsFullyConsumed) {
  testing::TempDir dir("clipforge");
  auto g = RandomGenerator(6);
  WriteArchive(dir / "clip_forge.zf", ClipForgeArchive(*g));
  const Archive a = ReadArchive(dir / "clip_forge.zf");
  EXPECT_TRUE(IsClipForgeArchive(a));
  // Set-difference oracle: every archive key translates and hits a parameter.
  std::set<std::string> targets;
  for (const auto& [name, _] : a.arrays) {
    const auto t = TranslateClipForgeName(name);
    ASSERT_TRUE(t.has_value()) << name;
    targets.insert(*t);
  }
  std::set<std::string> params;
  for (const Parameter* p : g->parameters()) params.insert(p->name);
  EXPECT_EQ(targets, params);

  auto h = LoadPretrained(a);
  const GeneratorSpec inferred{h->flow().config(), h->decoder().config()};
  EXPECT_EQ(ToJson(inferred), ToJson(GeneratorSpec{g->flow().config(), g->decoder().config()}));
  // Values went through f32; compare against the rounded originals.
  const ParameterList pa = g->parameters(), pb = h->parameters();
  for (size_t i = 0; i < pa.size(); ++i)
    for (size_t k = 0; k < pa[i]->value.size(); ++k)
      ASSERT_EQ(pb[i]->value[k], static_cast<double>(static_cast<float>(pa[i]->value[k]))) << pa[i]->name;
}

TEST(ClipForgeImport, OddFlowIndicesAndStrayKeysAreRejected) {
  EXPECT_FALSE(TranslateClipForgeName("latent_flow_model.flows.1.scale_net.0.weight").has_value());
  EXPECT_FALSE(TranslateClipForgeName("autoencoder.encoder.conv1.weight").has_value());
  EXPECT_EQ(TranslateClipForgeName("latent_flow_model.flows.4.translate_net.2.bias"),
            "flow.couplings.2.translate_net.2.bias");
  auto g = RandomGenerator(7);
  Archive a = ClipForgeArchive(*g);
  a.arrays["latent_flow_model.flows.1.running_mean"] = ArrayEntry{ArrayEntry::Dtype::kF32, {8}, std::vector<double>(8)};
  const std::string msg = ErrorOf([&] { LoadPretrained(a); });
  EXPECT_NE(msg.find("unmapped archive key: latent_flow_model.flows.1.running_mean"), std::string::npos) << msg;
}

TEST(ClipForgeImport, ImportedGeneratorMatchesItsSource) {
  testing::TempDir dir("clipforge-gen");
  auto g = RandomGenerator(8);
  WriteArchive(dir / "clip_forge.zf", ClipForgeArchive(*g));
  // Round the source through f32 as the archive does.
  for (Parameter* p : g->parameters())
    for (double& v : p->value) v = static_cast<float>(v);
  auto h = LoadPretrained(dir / "clip_forge.zf");
  std::mt19937_64 rng(9);
  const EmbeddingBatch text = testing::RandomUnitBatch(3, 12, rng);
  const auto x = g->Generate(text, NoiseMode::kZero, 0);
  const auto y = h->Generate(text, NoiseMode::kZero, 0);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(x[i].values, y[i].values);
}

TEST(VoxelFile, SoftRoundTripIsBitwise) {
  testing::TempDir dir("vox");
  std::mt19937_64 rng(10);
  VoxelGrid g(32);
  for (double& v : g.values) v = static_cast<float>(UniformUnit(rng));
  WriteVoxelFile(dir / "g.vox", g, VoxelDtype::kF32Soft);
  const VoxelGrid r = ReadVoxelFile(dir / "g.vox");
  EXPECT_EQ(r.resolution, 32);
  EXPECT_FALSE(r.binarized);
  EXPECT_EQ(std::memcmp(r.values.data(), g.values.data(), g.values.size() * sizeof(double)), 0);
  EXPECT_EQ(fs::file_size(dir / "g.vox"), 8u + 2u + 4u + 1u + 32u * 32u * 32u * 4u);
}

TEST(VoxelFile, BinaryRoundTripAndLayout) {
  testing::TempDir dir("vox-bin");
  VoxelGrid g(4, 0.0, true);
  g.at(1, 2, 3) = 1.0;
  g.at(3, 0, 0) = 1.0;
  WriteVoxelFile(dir / "g.vox", g, VoxelDtype::kU8Binary);
  const std::string bytes = Slurp(dir / "g.vox");
  ASSERT_EQ(bytes.size(), 15u + 64u);
  EXPECT_EQ(bytes.substr(0, 8), std::string("ZFVOXEL\0", 8));
  EXPECT_EQ(bytes[8], 1);
  EXPECT_EQ(bytes[9], 0);
  EXPECT_EQ(bytes[10], 4);
  EXPECT_EQ(bytes[14], 0);
  // x slowest, z fastest.
  EXPECT_EQ(bytes[15 + (1 * 4 + 2) * 4 + 3], 1);
  EXPECT_EQ(bytes[15 + 3 * 16], 1);
  const VoxelGrid r = ReadVoxelFile(dir / "g.vox");
  EXPECT_TRUE(r.binarized);
  EXPECT_EQ(r.values, g.values);
}

TEST(VoxelFile, RejectsMalformedFiles) {
  testing::TempDir dir("vox-bad");
  WriteVoxelFile(dir / "g.vox", VoxelGrid(4, 0.25), VoxelDtype::kF32Soft);
  const std::string bytes = Slurp(dir / "g.vox");

  std::string bad = bytes;
  bad.replace(0, 8, std::string("XXVOXEL\0", 8));
  Spit(dir / "magic.vox", bad);
  EXPECT_NE(ErrorOf([&] { ReadVoxelFile(dir / "magic.vox"); }).find("magic"), std::string::npos);

  Spit(dir / "short.vox", bytes.substr(0, bytes.size() - 1));
  const std::string msg = ErrorOf([&] { ReadVoxelFile(dir / "short.vox"); });
  EXPECT_NE(msg.find("short.vox"), std::string::npos) << msg;
  // 15-byte header plus 4^3 f32 values.
  EXPECT_NE(msg.find("expected 271 bytes, found 270"), std::string::npos) << msg;

  bad = bytes;
  bad[8] = 2;
  Spit(dir / "version.vox", bad);
  EXPECT_NE(ErrorOf([&] { ReadVoxelFile(dir / "version.vox"); }).find("version"), std::string::npos);

  bad = bytes;
  bad[14] = 7;
  Spit(dir / "dtype.vox", bad);
  EXPECT_NE(ErrorOf([&] { ReadVoxelFile(dir / "dtype.vox"); }).find("dtype"), std::string::npos);

  Spit(dir / "tiny.vox", bytes.substr(0, 10));
  EXPECT_THROW(ReadVoxelFile(dir / "tiny.vox"), FormatError);

  // A binary payload holding a 2 violates the {0,1} invariant.
  WriteVoxelFile(dir / "bin.vox", VoxelGrid(2, 1.0, true), VoxelDtype::kU8Binary);
  bad = Slurp(dir / "bin.vox");
  bad[16] = 2;
  Spit(dir / "nonbinary.vox", bad);
  EXPECT_THROW(ReadVoxelFile(dir / "nonbinary.vox"), FormatError);
}

TEST(VoxelFile, BinaryExportRequiresHardGrid) {
  testing::TempDir dir("vox-flag");
  EXPECT_THROW(WriteVoxelFile(dir / "a.vox", VoxelGrid(4, 0.3), VoxelDtype::kU8Binary), DomainError);
  VoxelGrid lying(2, 0.5, true);
  EXPECT_THROW(WriteVoxelFile(dir / "b.vox", lying, VoxelDtype::kU8Binary), DomainError);
  EXPECT_NO_THROW(WriteVoxelFile(dir / "c.vox", BinarizeHard(VoxelGrid(4, 0.3), 0.05), VoxelDtype::kU8Binary));
}

TEST(VoxelFile, NearestResampling) {
  VoxelGrid g(2);
  g.at(1, 0, 1) = 1.0;
  const VoxelGrid up = ResampleNearest(g, 4);
  for (int x = 0; x < 4; ++x)
    for (int y = 0; y < 4; ++y)
      for (int z = 0; z < 4; ++z) EXPECT_EQ(up.at(x, y, z), g.at(x / 2, y / 2, z / 2));
  EXPECT_EQ(ResampleNearest(up, 2).values, g.values);
}

TEST(Png, RoundTripsAtEightBits) {
  testing::TempDir dir("png");
  std::mt19937_64 rng(11);
  Image img(20);
  for (double& v : img.data) v = UniformUnit(rng);
  WritePng(dir / "i.png", img);
  const Image r = ReadPng(dir / "i.png");
  ASSERT_EQ(r.size, 20);
  for (size_t i = 0; i < img.data.size(); ++i) EXPECT_NEAR(r.data[i], img.data[i], 0.5 / 255.0 + 1e-12);
  // Exact levels survive unchanged.
  Image levels(4);
  for (size_t i = 0; i < levels.data.size(); ++i) levels.data[i] = static_cast<double>(i % 256) / 255.0;
  WritePng(dir / "l.png", levels);
  EXPECT_EQ(ReadPng(dir / "l.png").data, levels.data);
}

TEST(Config, DefaultsMatchTheDocumentedValues) {
  const RunConfig c;
  EXPECT_EQ(c.train.iterations, 15000);
  EXPECT_EQ(c.train.lr, 1e-5);
  EXPECT_EQ(c.train.adam_beta1, 0.9);
  EXPECT_EQ(c.train.adam_beta2, 0.999);
  EXPECT_EQ(c.train.batch_multiplier, 3);
  EXPECT_TRUE(c.train.finetune_flow);
  EXPECT_EQ(c.loss.lambda_c, 0.01);
  EXPECT_EQ(c.loss.tau, 50.0);
  EXPECT_EQ(c.binarize.beta, 200.0);
  EXPECT_EQ(c.binarize.gamma, 0.05);
  EXPECT_EQ(c.decoder.resolution, 128);
  EXPECT_EQ(c.render.image_size, 224);
}

TEST(Config, UnknownKeyNamesFileLineAndKey) {
  const std::string text = "# comment\nloss.tau = 30\n\nloss.lamda_c = 0.1\n";
  const std::string msg = ErrorOf([&] { ParseRunConfig(text, "run.conf"); });
  EXPECT_NE(msg.find("run.conf:4"), std::string::npos) << msg;
  EXPECT_NE(msg.find("loss.lamda_c"), std::string::npos) << msg;
  EXPECT_THROW(ParseRunConfig(text, "run.conf"), ConfigError);
}

TEST(Config, MalformedValuesAreErrors) {
  EXPECT_THROW(ParseRunConfig("loss.tau = fifty\n"), ConfigError);
  EXPECT_THROW(ParseRunConfig("train.zeroconv = maybe\n"), ConfigError);
  EXPECT_THROW(ParseRunConfig("render.projection = orthographic\n"), ConfigError);
  EXPECT_THROW(ParseRunConfig("loss.tau\n"), ConfigError);
  EXPECT_THROW(ParseRunConfig("train.iterations = 1.5\n"), ConfigError);
  EXPECT_THROW(LoadRunConfig("/nonexistent/zeroforge.conf"), ConfigError);
}

TEST(Config, SnapshotReparsesToTheSameConfig) {
  RunConfig c = testing::SmallRunConfig();
  c.loss.lambda_c = 0.1;
  c.loss.tau = 0.1 + 0.2;  // not exactly representable in short decimal
  c.train.zeroconv = true;
  c.train.batch_mode = BatchMode::kIid;
  c.render.background = 1.0 / 3.0;
  const std::string snap = SnapshotRunConfig(c);
  const RunConfig d = ParseRunConfig(snap, "snapshot");
  EXPECT_TRUE(SameConfig(c, d));
  EXPECT_EQ(d.loss.tau, c.loss.tau);
  EXPECT_EQ(d.render.background, c.render.background);
  EXPECT_EQ(SnapshotRunConfig(d), snap);
  // Every documented key appears exactly once.
  for (const std::string& key : ConfigKeys()) {
    const size_t at = snap.find(key + " = ");
    EXPECT_NE(at, std::string::npos) << key;
    EXPECT_EQ(snap.find(key + " = ", at + 1), std::string::npos) << key;
  }
  EXPECT_FALSE(SameConfig(c, RunConfig{}));
}

TEST(Config, AblationPresets) {
  RunConfig c;
  ApplyPreset(c, "beta300");
  EXPECT_EQ(c.binarize.beta, 300.0);
  ApplyPreset(c, "contrast-l0.1-t30");
  EXPECT_EQ(c.loss.lambda_c, 0.1);
  EXPECT_EQ(c.loss.tau, 30.0);
  EXPECT_EQ(PresetNames().size(), 7u);
  EXPECT_THROW(ApplyPreset(c, "beta250"), ConfigError);
}

TEST(Config, SetValueValidates) {
  RunConfig c;
  SetConfigValue(c, "binarize.beta", "100");
  EXPECT_EQ(c.binarize.beta, 100.0);
  EXPECT_THROW(SetConfigValue(c, "binarize.betta", "100"), ConfigError);
  c.train.init = InitMode::kPretrainedArchive;
  c.train.archive.clear();
  EXPECT_THROW(c.Validate(), ConfigError);
}

}  // namespace
}  // namespace zeroforge
