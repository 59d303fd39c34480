#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "ate/evaluation.hpp"
#include "ate/types.hpp"

namespace ate {

struct FriedmanResult {
  double statistic = 0.0;
  double p_value = 1.0;
  // Mean within-block rank per treatment; 1 is best under the chosen
  // orientation. Ties take midranks.
  std::vector<double> mean_ranks;
};

// Friedman rank test over a blocks-by-treatments score matrix, with the
// standard tie correction and a chi-square approximation (k - 1 degrees of
// freedom) for the p-value. Requires at least 2 blocks and 2 treatments and
// no missing cells. When every block is fully tied the statistic is 0 and the
// p-value 1.
FriedmanResult friedman(const Mat& scores, bool higher_is_better = true);

// Nemenyi critical distance q_alpha(k) * sqrt(k(k+1)/(6n)) for k treatments
// over n blocks. The q constants are the published two-tailed studentized-
// range-derived values for k in [2, 20] at alpha 0.05 or 0.10.
double nemenyi_cd(int k, int n, double alpha = 0.05);

// Product-moment correlation; inputs must have equal length >= 2 and must not
// be constant.
double pearson(const std::vector<double>& xs, const std::vector<double>& ys);

// Everything a critical-distance diagram needs: treatments ordered as in the
// input, their mean ranks, the test statistics, and the maximal groups of
// treatments whose mean ranks lie within one CD of each other.
struct RankReport {
  std::vector<std::string> treatments;
  std::vector<std::string> blocks;
  std::vector<double> mean_ranks;
  double statistic = 0.0;
  double p_value = 1.0;
  double alpha = 0.05;
  double cd = 0.0;
  std::vector<std::vector<std::string>> clusters;
};

// Ranks the matrix columns (methods) as treatments over its rows (embeddings)
// as blocks, or the transpose when `treatments_are_columns` is false.
RankReport rank_report(const ResultMatrix& matrix, double alpha = 0.05,
                       bool higher_is_better = true, bool treatments_are_columns = true);

void write_rank_report_json(std::ostream& out, const RankReport& report);

}  // namespace ate
