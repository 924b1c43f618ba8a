#include <doctest.h>

#include <cstring>
#include <fstream>
#include <limits>

#include "support.hpp"
#include "tractshape/manifest.hpp"
#include "tractshape/shape_table.hpp"
#include "tractshape/tck.hpp"
#include "tractshape/util.hpp"

using namespace tractshape;
using namespace testing;

namespace {

void put_f32(std::string& out, float v) {
  unsigned char b[4];
  std::memcpy(b, &v, 4);  // test hosts are little-endian
  out.append(reinterpret_cast<const char*>(b), 4);
}

void put_triplet(std::string& out, float x, float y, float z) {
  put_f32(out, x);
  put_f32(out, y);
  put_f32(out, z);
}

// Header padded so that the payload starts at a fixed offset.
std::string fixture_header(const std::string& datatype = "Float32LE", std::size_t offset = 64) {
  std::string h = "mrtrix tracks\ncount: 1\ndatatype: " + datatype + "\nfile: . " + std::to_string(offset) + "\nEND\n";
  h.resize(offset, '\0');
  return h;
}

const float kNaN = std::numeric_limits<float>::quiet_NaN();
const float kInf = std::numeric_limits<float>::infinity();

std::string one_line_fixture() {
  std::string b = fixture_header();
  put_triplet(b, 0, 0, 0);
  put_triplet(b, 1, 0, 0);
  put_triplet(b, kNaN, kNaN, kNaN);
  put_triplet(b, kInf, kInf, kInf);
  return b;
}

}  // namespace

TEST_CASE("hand-built TCK with one streamline") {
  const auto c = parse_tck(one_line_fixture(), "x", "s");
  REQUIRE(c.streamlines().size() == 1);
  REQUIRE(c.streamlines()[0].size() == 2);
  CHECK(c.streamlines()[0].points()[0] == Point3{0, 0, 0});
  CHECK(c.streamlines()[0].points()[1] == Point3{1, 0, 0});
  CHECK(c.id() == "x");
  CHECK(c.subject_id() == "s");
}

TEST_CASE("last streamline may end directly at the terminator") {
  std::string b = fixture_header();
  put_triplet(b, 0, 0, 0);
  put_triplet(b, 1, 2, 3);
  put_triplet(b, kInf, kInf, kInf);
  const auto c = parse_tck(b);
  REQUIRE(c.streamlines().size() == 1);
  CHECK(c.streamlines()[0].points()[1] == Point3{1, 2, 3});
}

TEST_CASE("magic line must begin with 'mrtrix tracks'") {
  auto b = one_line_fixture();
  CHECK_NOTHROW(parse_tck(b));
  std::string h = "mrtrix tracks v2\ndatatype: Float32LE\nfile: . 64\nEND\n";
  h.resize(64, '\0');
  h += one_line_fixture().substr(64);
  CHECK_NOTHROW(parse_tck(h));
  CHECK_ERROR_CODE(parse_tck("mrtrix track\nEND\n"), ErrorCode::MissingMagic);
  CHECK_ERROR_CODE(parse_tck("tracks\n"), ErrorCode::MissingMagic);
}

TEST_CASE("malformed TCK inputs raise the named errors") {
  CHECK_ERROR_CODE(parse_tck(""), ErrorCode::EmptyFile);

  std::string f64 = fixture_header("Float64LE");
  put_triplet(f64, kInf, kInf, kInf);
  CHECK_ERROR_CODE(parse_tck(f64), ErrorCode::UnsupportedDatatype);
  CHECK_ERROR_CODE(parse_tck(fixture_header("Float32BE") + std::string(12, '\0')), ErrorCode::UnsupportedDatatype);

  // Payload cut before the Inf terminator.
  auto cut = one_line_fixture();
  cut.resize(cut.size() - 12);
  CHECK_ERROR_CODE(parse_tck(cut), ErrorCode::TruncatedPayload);
  auto cut_mid = one_line_fixture();
  cut_mid.resize(cut_mid.size() - 5);
  CHECK_ERROR_CODE(parse_tck(cut_mid), ErrorCode::TruncatedPayload);

  // Terminator only: zero streamlines.
  std::string none = fixture_header();
  put_triplet(none, kInf, kInf, kInf);
  CHECK_ERROR_CODE(parse_tck(none), ErrorCode::EmptyFile);

  CHECK_ERROR_CODE(parse_tck("mrtrix tracks\ndatatype: Float32LE\nfile: . 40\n"), ErrorCode::MalformedHeader);
  CHECK_ERROR_CODE(parse_tck("mrtrix tracks\ndatatype: Float32LE\nEND\n"), ErrorCode::MalformedHeader);
  CHECK_ERROR_CODE(parse_tck("mrtrix tracks\nfile: . 40\nEND\n"), ErrorCode::MalformedHeader);
  CHECK_ERROR_CODE(parse_tck("mrtrix tracks\ndatatype: Float32LE\nfile: . 4000\nEND\n"), ErrorCode::TruncatedPayload);

  // A one-point streamline violates the geometry invariant.
  std::string single = fixture_header();
  put_triplet(single, 1, 1, 1);
  put_triplet(single, kNaN, kNaN, kNaN);
  put_triplet(single, kInf, kInf, kInf);
  CHECK_ERROR_CODE(parse_tck(single), ErrorCode::InvalidGeometry);
}

TEST_CASE("bytes after the terminator are ignored") {
  auto b = one_line_fixture();
  b += "garbage after the end";
  set_quiet(true);
  const auto c = parse_tck(b);
  set_quiet(false);
  CHECK(c.streamlines().size() == 1);
}

TEST_CASE("write then read is bit-exact after one float32 quantization") {
  const auto dir = scratch_dir("tck_roundtrip");
  const auto c = random_cluster(50, 37, 2024, 80.0);
  const auto path = (dir / "bundle.tck").string();
  write_tck(c, path, {{"generator", "test"}});
  const auto back = read_tck(path, {}, "sub");
  CHECK(back.id() == "bundle");
  REQUIRE(back.streamlines().size() == 50);
  bool exact = true;
  for (std::size_t s = 0; s < 50; ++s) {
    const auto& a = c.streamlines()[s].points();
    const auto& b = back.streamlines()[s].points();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      exact = exact && b[i].x == static_cast<double>(static_cast<float>(a[i].x)) &&
              b[i].y == static_cast<double>(static_cast<float>(a[i].y)) &&
              b[i].z == static_cast<double>(static_cast<float>(a[i].z));
    }
  }
  CHECK(exact);
  // Quantized data survives a second round trip unchanged, byte for byte.
  CHECK(encode_tck(back) == encode_tck(parse_tck(encode_tck(back))));
  const auto header = parse_tck_header(read_file_bytes(path));
  CHECK(header.fields.at("count") == "50");
  CHECK(header.fields.at("generator") == "test");
  CHECK(header.data_offset == read_file_bytes(path).find("END\n") + 4);
}

TEST_CASE("write_tck failures") {
  const auto c = random_cluster(2, 3, 1);
  CHECK_ERROR_CODE(write_tck(c, ""), ErrorCode::IoFailure);
  CHECK_ERROR_CODE(write_tck(c, "/nonexistent-dir/for/sure/x.tck"), ErrorCode::IoFailure);
  CHECK_ERROR_CODE(read_tck("/nonexistent-dir/missing.tck"), ErrorCode::IoFailure);
  const auto huge = cluster_of({line({{0, 0, 0}, {1e300, 0, 0}})});
  CHECK_ERROR_CODE(encode_tck(huge), ErrorCode::InvalidGeometry);
}

TEST_CASE("manifest parsing") {
  const auto dir = scratch_dir("manifest");
  write_tck(random_cluster(3, 4, 1), (dir / "a.tck").string());
  write_tck(random_cluster(3, 4, 2), (dir / "b.tck").string());
  const std::string good = R"({"subjects": [{"subject_id": "s1", "score": 1.5, "clusters": [
      {"cluster_id": "a", "file": "a.tck"},
      {"cluster_id": "b", "file": "b.tck",
       "ground_truth": {"length": 1, "span": 2, "volume": 3, "total_surface_area": 4, "irregularity": 5}}]}]})";
  const auto m = parse_manifest(good, dir.string());
  CHECK(m.cluster_count() == 2);
  CHECK(m.subjects[0].score.value() == 1.5);
  CHECK_FALSE(m.subjects[0].clusters[0].ground_truth.has_value());
  CHECK(m.subjects[0].clusters[1].ground_truth->volume == 3.0);
  CHECK(m.load({0, 1}).streamlines().size() == 3);

  // Dump then parse reproduces the manifest.
  const auto again = parse_manifest(dump_manifest(m), dir.string());
  CHECK(dump_manifest(again) == dump_manifest(m));

  const std::string dup = R"({"subjects": [{"subject_id": "s1", "clusters": [
      {"cluster_id": "a", "file": "a.tck"}, {"cluster_id": "a", "file": "b.tck"}]}]})";
  CHECK_ERROR_CODE(parse_manifest(dup, dir.string()), ErrorCode::SchemaError);
  const std::string missing_file = R"({"subjects": [{"subject_id": "s1", "clusters": [
      {"cluster_id": "a", "file": "zzz.tck"}]}]})";
  CHECK_ERROR_CODE(parse_manifest(missing_file, dir.string()), ErrorCode::SchemaError);
  CHECK_NOTHROW(parse_manifest(missing_file, dir.string(), false));
  CHECK_ERROR_CODE(parse_manifest(R"({"subjects": [{"clusters": []}]})", dir.string()), ErrorCode::SchemaError);
  CHECK_ERROR_CODE(parse_manifest("{\"subjects\": [", dir.string()), ErrorCode::SchemaError);
  CHECK_ERROR_CODE(parse_manifest(R"({"subjects": [{"subject_id": "s", "clusters": [
      {"cluster_id": "a", "file": "a.tck", "ground_truth": {"length": -1, "span": 2, "volume": 3,
       "total_surface_area": 4, "irregularity": 5}}]}]})", dir.string()), ErrorCode::SchemaError);
  CHECK_ERROR_CODE(read_manifest((dir / "nope.json").string()), ErrorCode::IoFailure);
}

TEST_CASE("schema errors carry the JSON location") {
  try {
    parse_manifest(R"({"subjects": [{"subject_id": "s1", "clusters": [{"file": "a.tck"}]}]})", ".", false);
    FAIL("expected SchemaError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SchemaError);
    CHECK(std::string(e.what()).find("subjects[0].clusters[0]") != std::string::npos);
  }
  try {
    parse_manifest("{\n  \"subjects\": [\n  oops\n]}", ".", false);
    FAIL("expected SchemaError");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("shape CSV") {
  const auto dir = scratch_dir("csv");
  std::vector<ShapeRow> rows;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.01, 5000.0);
  for (int c = 0; c < 73; ++c) {
    rows.push_back({"sub-001", "c" + std::to_string(c), {u(rng), u(rng), u(rng), u(rng), u(rng) / 1000}});
  }
  const auto path = (dir / "shapes.csv").string();
  write_shape_csv(rows, path);
  const auto text = read_file_bytes(path);
  CHECK(std::count(text.begin(), text.end(), '\n') == 74);
  CHECK(text.substr(0, text.find('\n')) == kShapeCsvHeader);

  const auto back = read_shape_csv(path);
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].subject_id == rows[i].subject_id);
    CHECK(back[i].cluster_id == rows[i].cluster_id);
    for (std::size_t m = 0; m < kNumMeasures; ++m) CHECK(rel_diff(back[i].shape[m], rows[i].shape[m]) <= 1e-5);
  }

  write_sidecar(path, {{"voxel_size", 1.0}});
  const auto meta = nlohmann::json::parse(read_file_bytes(sidecar_path(path)));
  CHECK(meta["tool"] == "tractshape");
  CHECK(meta["version"] == std::string(kToolVersion));
  CHECK(meta["config"]["voxel_size"] == 1.0);

  write_file_bytes((dir / "bad.csv").string(), std::string(kShapeCsvHeader) + "\ns,c,1,2,3\n");
  CHECK_ERROR_CODE(read_shape_csv((dir / "bad.csv").string()), ErrorCode::SchemaError);
  write_file_bytes((dir / "bad2.csv").string(), "a,b\n");
  CHECK_ERROR_CODE(read_shape_csv((dir / "bad2.csv").string()), ErrorCode::SchemaError);
}

TEST_CASE("little-endian helpers") {
  std::string out;
  append_le<std::uint32_t>(out, 0x01020304u);
  CHECK(static_cast<unsigned char>(out[0]) == 0x04);
  CHECK(load_le<std::uint32_t>(reinterpret_cast<const unsigned char*>(out.data())) == 0x01020304u);
  append_le<float>(out, 1.5f);
  CHECK(load_le<float>(reinterpret_cast<const unsigned char*>(out.data()) + 4) == 1.5f);
}
