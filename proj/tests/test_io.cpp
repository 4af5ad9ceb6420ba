#include "doctest.h"

#include <fstream>
#include <sstream>

#include "csi/errors.hpp"
#include "csi/io.hpp"
#include "csi/synth.hpp"
#include "support.hpp"

using namespace csi;

namespace {

WardGrouping ab_grouping() { return WardGrouping::identity({"A", "B"}, {"X"}); }

IngestResult ingest_text(const std::string& text, const WardGrouping& g, IngestOptions opt = {}) {
  std::istringstream in(text);
  return ingest_adt_csv(in, g, opt);
}

}  // namespace

TEST_CASE("trajectory JSON lines round trip") {
  const auto ds = sample_dataset(canonical_k4_spec(300, 5));
  std::stringstream buf;
  write_trajectories(buf, ds.data);
  const auto back = read_trajectories(buf);
  CHECK(back.states == ds.data.states);
  CHECK(back.max_holding == ds.data.max_holding);
  CHECK(back.diagnosis_labels == ds.data.diagnosis_labels);
  REQUIRE(back.items.size() == ds.data.items.size());
  for (std::size_t n = 0; n < back.items.size(); ++n) CHECK(back.items[n] == ds.data.items[n]);
}

TEST_CASE("bad trajectory files") {
  std::istringstream empty("");
  CHECK_THROWS_AS(read_trajectories(empty), ParseError);
  std::istringstream schema(R"({"schema":"other/9","states":["A","X"],"num_transient":1,"max_holding":3})");
  CHECK_THROWS_AS(read_trajectories(schema), StructuralError);
  std::istringstream unknown(
      R"({"schema":"csi.trajectories/1","states":["A","X"],"num_transient":1,"max_holding":3})"
      "\n"
      R"({"id":"1","visits":[["Q",2]],"exit":"X"})");
  CHECK_THROWS_AS(read_trajectories(unknown), StructuralError);
  std::istringstream broken(
      R"({"schema":"csi.trajectories/1","states":["A","X"],"num_transient":1,"max_holding":3})"
      "\n{oops");
  CHECK_THROWS_AS(read_trajectories(broken), ParseError);
}

TEST_CASE("two ADT rows give one merged stay") {
  const auto r = ingest_text(
      "patient_id,ward,entry,exit,disposition\n"
      "p1,A,0,24,\n"
      "p1,A,24,72,X\n",
      ab_grouping());
  REQUIRE(r.data.items.size() == 1);
  const auto& y = r.data.items[0];
  REQUIRE(y.visits.size() == 1);
  CHECK(y.visits[0] == Visit{0, 3});
  CHECK(y.exit == 2);
  CHECK(r.report.merged_stays == 1);
  CHECK(r.data.max_holding == 3);
}

TEST_CASE("partial days round up and date strings parse") {
  const auto r = ingest_text(
      "patient_id,ward,entry,exit,disposition\n"
      "p1,A,2024-01-01 08:00,2024-01-02 09:00,\n"
      "p1,B,2024-01-02 09:00,2024-01-04 09:00,X\n",
      ab_grouping());
  REQUIRE(r.data.items.size() == 1);
  CHECK(r.data.items[0].visits == std::vector<Visit>{{0, 2}, {1, 2}});
}

TEST_CASE("records with exit before entry are rejected") {
  const auto r = ingest_text(
      "patient_id,ward,entry,exit,disposition\n"
      "p1,A,48,24,X\n"
      "p2,B,0,48,X\n",
      ab_grouping());
  CHECK(r.report.rejected_patients == 1);
  REQUIRE(r.report.rejected.size() == 1);
  CHECK(r.report.rejected[0].patient == "p1");
  CHECK(r.report.rejected[0].line == 2);
  CHECK(r.data.items.size() == 1);
  CHECK(r.report.retention == doctest::Approx(0.5));
}

TEST_CASE("one-unit stays are dropped, overlaps rejected") {
  const auto r = ingest_text(
      "patient_id,ward,entry,exit,disposition\n"
      "p1,A,0,10,X\n"
      "p2,A,0,48,\n"
      "p2,B,24,72,X\n",
      ab_grouping());
  CHECK(r.report.dropped_short == 1);
  CHECK(r.report.rejected_patients == 1);
  CHECK(r.data.items.empty());
}

TEST_CASE("unmapped wards and bad groupings are configuration errors") {
  CHECK_THROWS_AS(ingest_text("patient_id,ward,entry,exit,disposition\np1,Z,0,48,X\n", ab_grouping()), ConfigError);
  auto g = ab_grouping();
  g.absorbing = {"A"};
  CHECK_THROWS_AS(ingest_text("patient_id,ward,entry,exit,disposition\n", g), ConfigError);
  CHECK_THROWS_AS(ingest_text("patient_id,ward,entry\n", ab_grouping()), ParseError);
  CHECK_THROWS_AS(WardGrouping::from_json(nlohmann::json::parse(R"({"wards": [1]})")), ConfigError);
}

TEST_CASE("export then re-ingest reproduces the dataset") {
  const auto ds = sample_dataset(canonical_k4_spec(400, 12));
  std::stringstream buf;
  export_adt_csv(buf, ds.data);
  const auto& labels = ds.data.states.labels();
  const std::size_t nt = ds.data.states.num_transient();
  WardGrouping g = WardGrouping::identity({labels.begin(), labels.begin() + static_cast<long>(nt)},
                                          {labels.begin() + static_cast<long>(nt), labels.end()});
  IngestOptions opt;
  opt.timestamps_in_units = true;
  opt.max_holding = ds.data.max_holding;
  const auto r = ingest_adt_csv(buf, g, opt);
  CHECK(r.data.states == ds.data.states);
  CHECK(r.report.rejected_patients == 0);
  REQUIRE(r.data.items.size() == ds.data.items.size());
  for (std::size_t n = 0; n < r.data.items.size(); ++n) {
    const auto& a = r.data.items[n];
    const auto& b = ds.data.items[n];
    CHECK(a.id == b.id);
    CHECK(a.visits == b.visits);
    CHECK(a.exit == b.exit);
    REQUIRE(a.attributes.has_value());
    CHECK(a.attributes->age == b.attributes->age);
    CHECK(a.attributes->sex == b.attributes->sex);
    CHECK(r.data.diagnosis_labels[a.attributes->diagnosis] == ds.data.diagnosis_labels[b.attributes->diagnosis]);
  }
}

TEST_CASE("model files round trip bit for bit") {
  SavedModel m;
  m.params = random_params(3, 4, 6, 77);
  m.meta.objective = -1234.5678901234567;
  m.meta.seed = 99;
  m.meta.diagnosis_labels = {"x", "y"};
  EmConfig cfg;
  cfg.K = 3;
  cfg.restarts = 2;
  m.meta.config = cfg;
  const std::string path = "model_roundtrip_test.json";
  save_model(path, m);
  const auto back = load_model(path);
  CHECK(model_to_json(back) == model_to_json(m));
  REQUIRE(back.params.num_clusters() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    const auto& a = back.params.components[k];
    const auto& b = m.params.components[k];
    CHECK(a.weight == b.weight);
    for (StateId u = 0; u < m.params.num_states(); ++u)
      for (StateId j = 0; j < m.params.num_states(); ++j) {
        CHECK(a.p(u, j) == b.p(u, j));
        for (int v = 1; v <= m.params.max_holding; ++v) CHECK(a.h(u, j, v) == b.h(u, j, v));
      }
  }
  CHECK(back.meta.seed == 99);
  CHECK(back.meta.config->K == 3);

  {
    std::ofstream f(path);
    f << "{\"schema\": \"csi.model/1\", ";
  }
  CHECK_THROWS_AS(load_model(path), ParseError);
  std::remove(path.c_str());

  auto j = model_to_json(m);
  j["schema"] = "csi.model/0";
  CHECK_THROWS_AS(model_from_json(j), StructuralError);
  CHECK_THROWS_AS(model_from_json(nlohmann::json::object()), ParseError);
}

TEST_CASE("structurally broken models are rejected") {
  SavedModel m;
  m.params = random_params(2, 3, 4, 3);
  auto j = model_to_json(m);
  auto& comp = j["params"]["components"][0];
  comp["weight"] = 0.0;
  CHECK_THROWS_AS(model_from_json(j), StructuralError);
  j = model_to_json(m);
  j["params"]["components"][1]["P"][0][1] = 5.0;
  CHECK_THROWS_AS(model_from_json(j), ModelInconsistencyError);
}
