#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "synthgen/errors.hpp"
#include "synthgen/records.hpp"

using namespace synthgen;
using namespace synthgen::data;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "synthgen_test_records";
  std::filesystem::create_directories(dir);
  return dir / name;
}

SyntheticRecord sample_record(const std::string& id) {
  SyntheticRecord r;
  r.id = id;
  r.template_id = "reasoning_cot_solve";
  r.seed_ids = {"s1", "s2"};
  r.question = "Compute the sum of 2 and 3.";
  r.target_answer = "5";
  r.raw_output = "raw";
  return r;
}

}  // namespace

TEST_CASE("canonical float formatting") {
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(1.0) == "1.0");          // integral values keep a decimal point
  CHECK(format_double(-3.0) == "-3.0");
  CHECK(format_double(0.1) == "0.10000000000000001");  // 17 significant digits
  CHECK(format_double(1e300) == "1.0000000000000001e+300");  // %.17g, no rounding games
}

TEST_CASE("canonical dump is stable and key-ordered as inserted") {
  ordered_json j;
  j["b"] = 1;
  j["a"] = 0.5;
  j["nested"] = ordered_json{{"x", true}, {"y", nullptr}};
  const std::string once = canonical_dump(j);
  CHECK(once == "{\"b\":1,\"a\":0.5,\"nested\":{\"x\":true,\"y\":null}}");
  CHECK(canonical_dump(j) == once);
}

TEST_CASE("record round trip preserves every field") {
  auto r = sample_record("abc");
  r.creation_cot = "thinking...";
  r.sampling.temperature = 0.7;
  r.sampling.rng_seed = 99;
  SyntheticRecord back;
  from_json_record(ordered_json::parse(canonical_dump(to_json(r))), back);
  CHECK(back.id == r.id);
  CHECK(back.seed_ids == r.seed_ids);
  CHECK(back.question == r.question);
  CHECK(back.target_answer == r.target_answer);
  CHECK(back.creation_cot == r.creation_cot);
  CHECK(back.sampling.temperature == r.sampling.temperature);
  CHECK(back.sampling.rng_seed == r.sampling.rng_seed);
  // serializing again yields the same bytes
  CHECK(canonical_dump(to_json(back)) == canonical_dump(to_json(r)));
}

TEST_CASE("schema violations are rejected with context") {
  auto path = temp_file("bad.jsonl");
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << encode_line(to_json(sample_record("ok1")));
    out << "{\"schema\":1,\"id\":\"broken\"\n";  // unterminated JSON
  }
  try {
    read_records<SyntheticRecord>(path);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("line 2") != std::string::npos);
  }
}

TEST_CASE("seed_ids cardinality is enforced") {
  auto r = sample_record("x");
  r.seed_ids = {"only_one"};
  auto j = to_json(sample_record("x"));
  j["seed_ids"] = ordered_json::array({"a"});
  SyntheticRecord back;
  CHECK_THROWS_AS(from_json_record(j, back), DataError);
}

TEST_CASE("response sample length is validated") {
  ResponseSample s;
  s.record_id = "r";
  s.text = "hello";
  s.length_chars = 5;
  auto j = to_json(s);
  j["length_chars"] = 4;
  ResponseSample back;
  CHECK_THROWS_AS(from_json_record(j, back), DataError);
}

TEST_CASE("write then read is the identity, optionally sorted") {
  auto path = temp_file("roundtrip.jsonl");
  std::vector<SyntheticRecord> recs = {sample_record("bb"), sample_record("aa")};
  write_records(recs, path);
  auto back = read_records<SyntheticRecord>(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].id == "bb");
  write_records(recs, path, /*sort_by_id=*/true);
  back = read_records<SyntheticRecord>(path);
  CHECK(back[0].id == "aa");
}

TEST_CASE("nearest rank percentile") {
  std::vector<std::uint64_t> v = {15, 20, 35, 40, 50};
  CHECK(nearest_rank(v, 0.30) == 20);
  CHECK(nearest_rank(v, 0.40) == 20);
  CHECK(nearest_rank(v, 0.50) == 35);
  CHECK(nearest_rank(v, 1.00) == 50);
  CHECK(nearest_rank({7}, 0.5) == 7);
}

TEST_CASE("dataset stats merge equals stats of concatenation") {
  std::vector<SyntheticRecord> a, b, all;
  for (int i = 0; i < 7; ++i) {
    auto r = sample_record("a" + std::to_string(i));
    r.question = std::string(10 + i, 'q');
    a.push_back(r);
  }
  for (int i = 0; i < 5; ++i) {
    auto r = sample_record("b" + std::to_string(i));
    r.template_id = "reasoning_self_instruct";
    r.target_answer = "1/2";
    r.question = std::string(40 + i, 'q');
    b.push_back(r);
  }
  all = a;
  all.insert(all.end(), b.begin(), b.end());
  auto sa = dataset_stats(a);
  sa.merge(dataset_stats(b));
  auto sall = dataset_stats(all);
  CHECK(sa.total == sall.total);
  CHECK(sa.per_template == sall.per_template);
  CHECK(sa.answer_kinds == sall.answer_kinds);
  // percentiles are recomputed over the merged lengths
  CHECK(sa.length_percentiles == sall.length_percentiles);
}

TEST_CASE("manifest store and load round trip, atomically") {
  auto dir = std::filesystem::temp_directory_path() / "synthgen_test_manifest";
  std::filesystem::create_directories(dir);
  PipelineManifest m;
  m.config_hash = "deadbeef";
  m.global_rng_seed = 42;
  m.stage_checkpoints["generate_records"] = 10;
  store_manifest(dir, m);
  auto back = load_manifest(dir);
  CHECK(back.config_hash == "deadbeef");
  CHECK(back.global_rng_seed == 42);
  CHECK(back.stage_checkpoints.at("generate_records") == 10);
  // no stray temp file left behind
  CHECK_FALSE(std::filesystem::exists(manifest_path_for(dir) + ".tmp"));
}
