#include <doctest.h>

#include "tripleagent/report.hpp"

using namespace tripleagent;
using controller::CampaignState;
using model::PointCategory;

namespace {

model::MethodRef ref(const char* name) { return model::MethodRef{name}; }

model::PerturbationPoint point(const char* method, std::uint32_t location,
                               const char* exception = "E1") {
  return {ref(method), location, exception};
}

/// A small synthetic campaign: one point per category plus an unreached
/// one, with a validating binding on the fragile point.
CampaignState sample_state() {
  CampaignState state;
  const auto fragile = point("a/frag", 0);
  const auto sensitive = point("b/sens", 1);
  const auto immunized = point("c/immu", 2);
  const auto unreached = point("d/dead", 0);
  state.points = {fragile, sensitive, immunized, unreached};
  std::sort(state.points.begin(), state.points.end());
  state.baseline_reaches = {{fragile, 3}, {sensitive, 5}, {immunized, 1}, {unreached, 0}};
  state.classification.fragile = {fragile};
  state.classification.sensitive = {sensitive};
  state.classification.immunized = {immunized};
  state.classification.unreached = {unreached};
  state.candidates = {{fragile, ref("a/frag")},
                      {fragile, ref("a/mid")},
                      {sensitive, ref("b/sens")},
                      {immunized, ref("c/immu")}};
  state.default_handlers[fragile] = ref("a/top");
  state.default_handlers[sensitive] = std::nullopt;
  state.default_handlers[immunized] = ref("c/top");
  state.validated = {
      {{fragile, ref("a/mid")}, PointCategory::Immunized,
       model::BindingStatus::ValidatedImprovement},
      {{immunized, ref("c/immu")}, PointCategory::Immunized,
       model::BindingStatus::AlternativeResilient},
  };
  state.executions_total = 1 + 2 * 3 + 2 * 4;
  state.baseline_wall_ms = 20.4;
  state.instrumented_inactive_wall_ms = 21.1;
  return state;
}

}  // namespace

TEST_CASE("overhead arithmetic") {
  CHECK(report::overhead_compare(20.4, 21.1) == doctest::Approx(3.5).epsilon(0.03));
  CHECK(report::overhead_compare(15.0, 15.0) == doctest::Approx(0.0));
  CHECK(report::overhead_compare(10.0, 11.0) == doctest::Approx(10.0));
  CHECK_THROWS_AS(report::overhead_compare(0.0, 10.0), UsageError);
}

TEST_CASE("candidate statistics use the lower-middle median") {
  const auto abc = report::candidate_stats({0, 2, 10});
  CHECK(abc.min == 0);
  CHECK(abc.median == 2);
  CHECK(abc.max == 10);

  const auto zeros = report::candidate_stats({0, 0, 0});
  CHECK(zeros == report::CandidateStats{0, 0, 0});

  const auto even = report::candidate_stats({3, 1});
  CHECK(even.median == 1);

  CHECK(report::candidate_stats({}) == report::CandidateStats{0, 0, 0});
  CHECK(report::candidate_stats({5}) == report::CandidateStats{5, 5, 5});
}

TEST_CASE("report counts, matrix and rows") {
  const auto report = report::build_report(sample_state());
  CHECK(report.fragile == 1);
  CHECK(report.sensitive == 1);
  CHECK(report.immunized == 1);
  CHECK(report.unreached == 1);

  // fragile upgraded to immunized (cell c), sensitive unchanged (d),
  // immunized stays (f)
  CHECK(report.matrix == std::array<std::uint64_t, 6>{0, 0, 1, 1, 0, 1});

  REQUIRE(report.rows.size() == 4);
  CHECK(report.rows[0].category == PointCategory::Fragile);
  CHECK(report.rows[1].category == PointCategory::Sensitive);
  CHECK(report.rows[2].category == PointCategory::Immunized);
  CHECK(report.rows[3].category == PointCategory::Unreached);
  CHECK(report.rows[0].candidate_count == 2);
  CHECK(report.rows[3].candidate_count == 0);
  REQUIRE(report.rows[0].bindings.size() == 1);
  CHECK(report.rows[0].bindings[0].handler == ref("a/mid"));

  CHECK(report.candidate_stats == report::CandidateStats{0, 1, 2});
  CHECK(report.actual_executions == 15);
  CHECK(report.formula_executions == model::experiment_budget(3, 4) + 1);
  CHECK(report.overhead_percent == doctest::Approx(3.43).epsilon(0.01));
}

TEST_CASE("empty campaigns render all-zero reports") {
  const auto report = report::build_report(CampaignState{});
  CHECK(report.fragile + report.sensitive + report.immunized + report.unreached == 0);
  CHECK(report.matrix == std::array<std::uint64_t, 6>{0, 0, 0, 0, 0, 0});
  CHECK(report.rows.empty());
}

TEST_CASE("conservation violations surface as integrity errors") {
  auto state = sample_state();
  state.points.push_back(point("z/extra", 9));  // never classified
  CHECK_THROWS_AS(report::build_report(state), IntegrityError);
}

TEST_CASE("structured rendering round-trips") {
  const auto report = report::build_report(sample_state());
  const std::string text = report::render_structured(report);
  CHECK(report::parse_structured(text) == report);
}

TEST_CASE("csv matrix has the header and exactly six cells") {
  const auto report = report::build_report(sample_state());
  const std::string csv = report::render_csv_matrix(report);
  CHECK(csv ==
        "origin,achieved,count\n"
        "fragile,fragile,0\n"
        "fragile,sensitive,0\n"
        "fragile,immunized,1\n"
        "sensitive,sensitive,1\n"
        "sensitive,immunized,0\n"
        "immunized,immunized,1\n");
}

TEST_CASE("human rendering mirrors the result-table columns") {
  const auto report = report::build_report(sample_state());
  const std::string text = report::render_human(report);
  CHECK(text.find("Perturbation Point | Exception Type | Default Handling Method | "
                  "Failure-oblivious Method | Improvement") != std::string::npos);
  CHECK(text.find("a/frag@0 | E1 | a/top | a/mid | fragile - immunized") != std::string::npos);
  CHECK(text.find("c/immu@2 | E1 | c/top | c/immu | alternative resilient method") !=
        std::string::npos);
}

TEST_CASE("conservation holds over assorted synthetic states") {
  for (int variant = 0; variant < 4; ++variant) {
    auto state = sample_state();
    if (variant % 2 == 1) state.validated.clear();
    if (variant >= 2) state.candidates.clear();
    const auto report = report::build_report(state);
    CHECK(report.fragile + report.sensitive + report.immunized + report.unreached ==
          state.points.size());
    std::uint64_t matrix_total = 0;
    for (const auto cell : report.matrix) matrix_total += cell;
    CHECK(matrix_total == report.fragile + report.sensitive + report.immunized);
  }
}
