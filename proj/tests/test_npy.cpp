#include <gtest/gtest.h>

#include <filesystem>
#include <functional>

#include "cure/bundle.hpp"
#include "cure/config.hpp"
#include "test_support.hpp"

using namespace cure;
using cure::testing::fixture;
namespace fs = std::filesystem;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected cure::Error";
  return ErrorKind::DomainError;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("cure_npy_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const std::vector<std::string> kValid = {"concept_768x6", "concept_768x6_f4", "retain_768x5",
                                         "sigma_4_3",     "vector_5",         "zeros_1x1"};

}  // namespace

TEST(Npy, DecodeEncodeIsByteIdentity) {
  for (const auto& name : kValid) {
    const std::string bytes = npy::read_file(fixture("embeddings/" + name + ".npy"));
    EXPECT_EQ(npy::encode(npy::decode(bytes)), bytes) << name;
  }
}

TEST(Npy, SidecarsAgree) {
  for (const auto& name : kValid) {
    const Json side = Json::parse(npy::read_file(fixture("embeddings/" + name + ".json")));
    const npy::Tensor t = npy::read_tensor(fixture("embeddings/" + name + ".npy"));
    EXPECT_EQ(side["shape"].get<std::vector<std::size_t>>(), t.shape) << name;
    EXPECT_EQ(side["descr"].get<std::string>(), npy::descr(t.dtype)) << name;
    EXPECT_NEAR(side["frobenius"].get<double>(), t.data.norm(), 1e-9 * (1.0 + t.data.norm())) << name;
  }
}

TEST(Npy, EmbeddingShapes) {
  const auto e = npy::read_embedding(fixture("embeddings/concept_768x6.npy"));
  EXPECT_EQ(e.dim(), 768);
  EXPECT_EQ(e.tokens(), 6);
  EXPECT_EQ(e.label(), "concept_768x6");
  const auto v = npy::read_embedding(fixture("embeddings/vector_5.npy"), "v");
  EXPECT_EQ(v.dim(), 5);
  EXPECT_EQ(v.tokens(), 1);
  EXPECT_EQ(v.label(), "v");
}

TEST(Npy, SinglePrecisionIsWidenedExactly) {
  const auto t = npy::read_tensor(fixture("embeddings/concept_768x6_f4.npy"));
  EXPECT_EQ(t.dtype, npy::Dtype::f4);
  for (Eigen::Index i = 0; i < t.data.size(); ++i) {
    const double x = t.data.data()[i];
    EXPECT_EQ(static_cast<double>(static_cast<float>(x)), x);
  }
  EXPECT_EQ(npy::encode(t), npy::read_file(fixture("embeddings/concept_768x6_f4.npy")));
}

TEST(Npy, ZeroMatrixPayload) {
  const std::string bytes = npy::encode(npy::Tensor{{1, 1}, npy::Dtype::f8, Matrix::Zero(1, 1)});
  ASSERT_EQ(bytes.size() % 64, 8u);
  EXPECT_EQ(bytes.substr(bytes.size() - 8), std::string(8, '\0'));
  EXPECT_EQ(bytes, npy::read_file(fixture("embeddings/zeros_1x1.npy")));
}

TEST(Npy, HeaderIsAligned) {
  for (std::size_t rows : {1u, 9u, 10u, 768u, 123456u}) {
    const std::string bytes = npy::encode(npy::Tensor{{rows, 2}, npy::Dtype::f8, Matrix::Zero(rows, 2)});
    const std::size_t hlen = static_cast<unsigned char>(bytes[8]) | (static_cast<unsigned char>(bytes[9]) << 8);
    EXPECT_EQ((npy::kPreambleSize + hlen) % npy::kAlign, 0u) << rows;
    EXPECT_EQ(bytes[npy::kPreambleSize + hlen - 1], '\n');
  }
}

TEST(Npy, WriteTwiceSameBytes) {
  const fs::path dir = scratch("twice");
  std::mt19937_64 rng(5);
  const Matrix m = cure::testing::gaussian(rng, 13, 7);
  npy::write_tensor(dir / "a.npy", m);
  npy::write_tensor(dir / "b.npy", m);
  EXPECT_EQ(npy::read_file(dir / "a.npy"), npy::read_file(dir / "b.npy"));
  EXPECT_EQ(npy::read_tensor(dir / "a.npy").data, m);
  fs::remove_all(dir);
}

TEST(Npy, MalformedFilesNameTheirError) {
  const std::vector<std::pair<std::string, ErrorKind>> cases = {
      {"bad_magic", ErrorKind::BadMagic},          {"version2", ErrorKind::BadMagic},
      {"big_endian", ErrorKind::UnsupportedDtype}, {"int32", ErrorKind::UnsupportedDtype},
      {"fortran_order", ErrorKind::UnsupportedLayout}, {"rank3", ErrorKind::UnsupportedLayout},
      {"truncated", ErrorKind::TruncatedPayload},  {"extra_bytes", ErrorKind::TruncatedPayload},
  };
  for (const auto& [name, kind] : cases) {
    const fs::path p = fixture("malformed/" + name + ".npy");
    EXPECT_EQ(kind_of([&] { npy::read_tensor(p); }), kind) << name;
    try {
      npy::read_tensor(p);
    } catch (const Error& e) {
      EXPECT_NE(e.detail().find(name), std::string::npos) << "path missing from message";
    }
  }
}

TEST(Npy, MissingFileIsIoError) {
  EXPECT_EQ(kind_of([] { npy::read_tensor("/nonexistent/x.npy"); }), ErrorKind::IoError);
}

TEST(Npy, ParseDtype) {
  EXPECT_EQ(npy::parse_dtype("<f4"), npy::Dtype::f4);
  EXPECT_EQ(npy::parse_dtype("<f8"), npy::Dtype::f8);
  EXPECT_EQ(kind_of([] { npy::parse_dtype(">f8"); }), ErrorKind::UnsupportedDtype);
}

TEST(Manifest, ParsesAndFormats) {
  const Manifest m = parse_manifest("# comment\ntotal_param_count 100\n\ntensor a 2 3 editable\ntensor b 1 1 frozen # x\n");
  EXPECT_EQ(m.total_param_count, 100);
  ASSERT_EQ(m.tensors.size(), 2u);
  EXPECT_EQ(m.editable_names(), std::set<std::string>{"a"});
  EXPECT_EQ(m.editable_param_count(), 6);
  EXPECT_DOUBLE_EQ(m.editable_fraction(), 0.06);
  EXPECT_EQ(format_manifest(parse_manifest(format_manifest(m))), format_manifest(m));
}

TEST(Manifest, RejectsBadLines) {
  for (const char* text : {"tensor a 2 editable\n", "tensor a 2 3 maybe\n", "weights a 2 3 editable\n",
                           "tensor a 0 3 editable\n", "tensor a 1 1 editable\ntensor a 1 1 frozen\n",
                           "total_param_count -4\n"}) {
    EXPECT_EQ(kind_of([&] { parse_manifest(text); }), ErrorKind::SchemaError) << text;
  }
  try {
    parse_manifest("\n\nbogus\n", "m.txt");
  } catch (const Error& e) {
    EXPECT_NE(e.detail().find("m.txt:3"), std::string::npos);
  }
}

TEST(Manifest, SdFixture) {
  const Manifest m = read_manifest(fixture("sd14_cross_attention.manifest"));
  EXPECT_EQ(m.tensors.size(), 32u);
  EXPECT_EQ(m.editable_param_count(), 19169280);
  EXPECT_EQ(m.total_param_count, 859520964);
}

TEST(Bundle, ReadWriteRoundTrip) {
  const WeightBundle b = read_bundle(fixture("bundles/tiny768"));
  EXPECT_EQ(b.entries().size(), 3u);
  EXPECT_EQ(b.editable_param_count(), 2 * 8 * 768);
  EXPECT_EQ(b.total_param_count(), 20000);
  EXPECT_FALSE(b.is_editable("blocks.0.attn1.to_q.weight"));

  const fs::path dir = scratch("bundle");
  write_bundle(dir / "copy", b);
  for (const auto& e : b.entries()) {
    const std::string name = e.name + ".npy";
    EXPECT_EQ(npy::read_file(dir / "copy" / name), npy::read_file(fixture("bundles/tiny768/" + name))) << name;
  }
  const WeightBundle again = read_bundle(dir / "copy");
  EXPECT_EQ(again.editable(), b.editable());
  EXPECT_EQ(again.total_param_count(), 20000);
  fs::remove_all(dir);
}

TEST(Bundle, ApplyManifestChecksShapes) {
  const WeightBundle b = read_bundle(fixture("bundles/tiny768"));
  EXPECT_EQ(kind_of([&] { apply_manifest(b, parse_manifest("tensor blocks.0.attn2.to_k.weight 8 767 editable\n")); }),
            ErrorKind::DimensionMismatch);
  EXPECT_EQ(kind_of([&] { apply_manifest(b, parse_manifest("tensor nope 8 768 editable\n")); }),
            ErrorKind::SchemaError);
  const WeightBundle only_k = apply_manifest(b, parse_manifest("tensor blocks.0.attn2.to_k.weight 8 768 editable\n"));
  EXPECT_EQ(only_k.editable().size(), 1u);
  EXPECT_EQ(only_k.total_param_count(), 20000);
}

TEST(Bundle, SynthesizedBundleIsSeeded) {
  const Manifest m = parse_manifest("tensor a 4 6 editable\ntensor b 2 2 frozen\n");
  const WeightBundle x = synthesize_bundle(m, 3), y = synthesize_bundle(m, 3), z = synthesize_bundle(m, 4);
  EXPECT_EQ(x.entries()[0].matrix, y.entries()[0].matrix);
  EXPECT_NE(x.entries()[0].matrix, z.entries()[0].matrix);
  EXPECT_EQ(x.editable(), std::set<std::string>{"a"});
}
