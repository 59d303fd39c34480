#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>
#include <json.hpp>

#include "ate/evaluation.hpp"
#include "ate/rank_stats.hpp"
#include "ate/types.hpp"

using ate::Mat;

namespace {

Mat mat_from(const std::vector<std::vector<double>>& rows) {
  Mat m(static_cast<Eigen::Index>(rows.size()),
        static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return m;
}

ate::ResultMatrix load_csv(const std::string& name) {
  std::ifstream in(std::string(ATE_TEST_DATA_DIR) + "/" + name);
  REQUIRE(in);
  return ate::read_result_csv(in);
}

}  // namespace

TEST_CASE("friedman matches the reference implementation on a tied fixture") {
  const Mat scores = mat_from({{1, 2, 2}, {3, 3, 3}, {1, 2, 3}, {2, 1, 2}});
  const ate::FriedmanResult r = ate::friedman(scores, /*higher_is_better=*/true);
  CHECK(r.statistic == doctest::Approx(2.6).epsilon(1e-12));
  CHECK(r.p_value == doctest::Approx(0.272531793034).epsilon(1e-9));
  REQUIRE(r.mean_ranks.size() == 3);
  CHECK(r.mean_ranks[0] == doctest::Approx(2.375));
  CHECK(r.mean_ranks[1] == doctest::Approx(2.125));
  CHECK(r.mean_ranks[2] == doctest::Approx(1.5));
}

TEST_CASE("friedman matches the reference implementation without ties") {
  const Mat scores = mat_from({{9, 5, 1}, {8, 6, 2}, {7, 4, 3}, {9.5, 5.5, 0.5}});
  const ate::FriedmanResult r = ate::friedman(scores);
  CHECK(r.statistic == doctest::Approx(8.0).epsilon(1e-12));
  CHECK(r.p_value == doctest::Approx(0.018315638888734).epsilon(1e-12));
  CHECK(r.mean_ranks == std::vector<double>{1.0, 2.0, 3.0});

  // The statistic ignores orientation; the ranks flip.
  const ate::FriedmanResult lower = ate::friedman(scores, /*higher_is_better=*/false);
  CHECK(lower.statistic == doctest::Approx(8.0).epsilon(1e-12));
  CHECK(lower.mean_ranks == std::vector<double>{3.0, 2.0, 1.0});
}

TEST_CASE("friedman degenerates gracefully on full ties and rejects tiny input") {
  const ate::FriedmanResult r = ate::friedman(mat_from({{1, 1, 1}, {2, 2, 2}}));
  CHECK(r.statistic == 0.0);
  CHECK(r.p_value == 1.0);
  CHECK_THROWS_AS(ate::friedman(mat_from({{1, 2, 3}})), ate::ContractError);
  CHECK_THROWS_AS(ate::friedman(mat_from({{1}, {2}})), ate::ContractError);
}

TEST_CASE("nemenyi critical distances use the published q constants") {
  CHECK(ate::nemenyi_cd(2, 4, 0.05) == doctest::Approx(0.98).epsilon(1e-12));
  CHECK(ate::nemenyi_cd(8, 11, 0.05) == doctest::Approx(3.165776).epsilon(1e-6));
  CHECK(ate::nemenyi_cd(8, 11, 0.10) == doctest::Approx(2.903615301341249).epsilon(1e-9));
  CHECK(ate::nemenyi_cd(20, 5, 0.05) ==
        doctest::Approx(3.544 * std::sqrt(20.0 * 21.0 / (6.0 * 5.0))).epsilon(1e-12));
  CHECK_THROWS_AS(ate::nemenyi_cd(1, 5, 0.05), ate::ContractError);
  CHECK_THROWS_AS(ate::nemenyi_cd(21, 5, 0.05), ate::ContractError);
  CHECK_THROWS_AS(ate::nemenyi_cd(8, 11, 0.2), ate::ContractError);
}

TEST_CASE("pearson matches the closed-form value and rejects degenerate input") {
  CHECK(ate::pearson({1, 2, 3, 4, 5}, {2, 1, 4, 3, 5}) == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(ate::pearson({1, 2, 3}, {10, 20, 30}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ate::pearson({1, 2, 3}, {3, 2, 1}) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK_THROWS_AS(ate::pearson({1, 1, 1}, {1, 2, 3}), ate::ContractError);
  CHECK_THROWS_AS(ate::pearson({1, 2}, {1, 2, 3}), ate::ContractError);
  CHECK_THROWS_AS(ate::pearson({1}, {2}), ate::ContractError);
}

TEST_CASE("rank report on the restaurants benchmark matches frozen statistics") {
  const ate::ResultMatrix m = load_csv("scores_restaurants.csv");
  REQUIRE(m.embeddings.size() == 11);
  REQUIRE(m.methods.size() == 8);
  const ate::RankReport r = ate::rank_report(m, 0.05);

  CHECK(r.statistic == doctest::Approx(64.1515151515).epsilon(1e-9));
  CHECK(r.p_value == doctest::Approx(2.226511e-11).epsilon(1e-4));
  CHECK(r.p_value < 0.05);
  CHECK(r.cd == doctest::Approx(ate::nemenyi_cd(8, 11, 0.05)).epsilon(1e-12));
  CHECK(r.blocks == m.embeddings);
  CHECK(r.treatments == m.methods);

  // Best mean rank goes to the full model.
  const auto best =
      std::min_element(r.mean_ranks.begin(), r.mean_ranks.end()) - r.mean_ranks.begin();
  CHECK(r.treatments[static_cast<std::size_t>(best)] == "WoCh-BiLSTM-CRF");
  CHECK(r.mean_ranks[static_cast<std::size_t>(best)] ==
        doctest::Approx(1.4545454545).epsilon(1e-9));

  // Every CRF head out-ranks (smaller mean rank than) its softmax sibling.
  const auto rank_of = [&](const std::string& name) {
    for (std::size_t i = 0; i < r.treatments.size(); ++i) {
      if (r.treatments[i] == name) {
        return r.mean_ranks[i];
      }
    }
    FAIL("missing treatment " << name);
    return 0.0;
  };
  CHECK(rank_of("Wo-LSTM-CRF") < rank_of("Wo-LSTM"));
  CHECK(rank_of("WoCh-LSTM-CRF") < rank_of("WoCh-LSTM"));
  CHECK(rank_of("Wo-BiLSTM-CRF") < rank_of("Wo-BiLSTM"));
  CHECK(rank_of("WoCh-BiLSTM-CRF") < rank_of("WoCh-BiLSTM"));

  // The top cluster is exactly the four CRF methods, and the best and worst
  // methods never share a cluster.
  REQUIRE(!r.clusters.empty());
  const std::vector<std::string> top = {"WoCh-BiLSTM-CRF", "WoCh-LSTM-CRF", "Wo-BiLSTM-CRF",
                                        "Wo-LSTM-CRF"};
  CHECK(r.clusters.front() == top);
  for (const auto& cluster : r.clusters) {
    const bool has_best = std::count(cluster.begin(), cluster.end(), "WoCh-BiLSTM-CRF") > 0;
    const bool has_worst = std::count(cluster.begin(), cluster.end(), "Wo-LSTM") > 0;
    CHECK_FALSE((has_best && has_worst));
  }
}

TEST_CASE("rank report on the laptops benchmark keeps the crf ordering") {
  const ate::ResultMatrix m = load_csv("scores_laptops.csv");
  const ate::RankReport r = ate::rank_report(m, 0.05);
  CHECK(r.statistic == doctest::Approx(68.6666666667).epsilon(1e-9));
  CHECK(r.p_value == doctest::Approx(2.746413e-12).epsilon(1e-4));
  const auto rank_of = [&](const std::string& name) {
    for (std::size_t i = 0; i < r.treatments.size(); ++i) {
      if (r.treatments[i] == name) {
        return r.mean_ranks[i];
      }
    }
    FAIL("missing treatment " << name);
    return 0.0;
  };
  CHECK(rank_of("Wo-LSTM-CRF") < rank_of("Wo-LSTM"));
  CHECK(rank_of("WoCh-LSTM-CRF") < rank_of("WoCh-LSTM"));
  CHECK(rank_of("Wo-BiLSTM-CRF") < rank_of("Wo-BiLSTM"));
  CHECK(rank_of("WoCh-BiLSTM-CRF") < rank_of("WoCh-BiLSTM"));
  CHECK(rank_of("WoCh-BiLSTM-CRF") == doctest::Approx(1.4545454545).epsilon(1e-9));
}

TEST_CASE("rank report can treat embeddings as the ranked treatments") {
  const ate::ResultMatrix m = load_csv("scores_restaurants.csv");
  const ate::RankReport r =
      ate::rank_report(m, 0.05, /*higher_is_better=*/true, /*treatments_are_columns=*/false);
  CHECK(r.treatments == m.embeddings);
  CHECK(r.blocks == m.methods);
  CHECK(r.mean_ranks.size() == 11);
  CHECK(r.cd == doctest::Approx(ate::nemenyi_cd(11, 8, 0.05)).epsilon(1e-12));
  // The two largest-corpus vector sets dominate; the review-domain one trails.
  const auto rank_of = [&](const std::string& name) {
    for (std::size_t i = 0; i < r.treatments.size(); ++i) {
      if (r.treatments[i] == name) {
        return r.mean_ranks[i];
      }
    }
    FAIL("missing treatment " << name);
    return 0.0;
  };
  CHECK(rank_of("Glove.42B") < rank_of("Glove.6B.50"));
  CHECK(rank_of("AmazonReviews") > rank_of("Glove.840B"));
}

TEST_CASE("rank report serializes to json with all fields intact") {
  const ate::ResultMatrix m = load_csv("scores_restaurants.csv");
  const ate::RankReport r = ate::rank_report(m, 0.05);
  std::ostringstream out;
  ate::write_rank_report_json(out, r);
  const auto j = nlohmann::json::parse(out.str());
  CHECK(j.at("treatments").get<std::vector<std::string>>() == r.treatments);
  CHECK(j.at("blocks").get<std::vector<std::string>>() == r.blocks);
  CHECK(j.at("mean_ranks").get<std::vector<double>>() == r.mean_ranks);
  CHECK(j.at("friedman_statistic").get<double>() == doctest::Approx(r.statistic));
  CHECK(j.at("p_value").get<double>() == doctest::Approx(r.p_value));
  CHECK(j.at("alpha").get<double>() == 0.05);
  CHECK(j.at("cd").get<double>() == doctest::Approx(r.cd));
  CHECK(j.at("clusters").get<std::vector<std::vector<std::string>>>() == r.clusters);
}
