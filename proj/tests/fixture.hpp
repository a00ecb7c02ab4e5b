#pragma once

// Synthetic schema-compatible fixture for the CSV pipeline tests: community
// survey column names over a genuine factor design x = B f + u, with the
// source/target label pair produced by the simulation truth functions (the
// target adds the posterior shift on top of the source function). Labels are
// synthetic and unbounded; features get scaled by the pipeline itself.

#include <fstream>
#include <string>
#include <vector>

#include "fanlasso/format.hpp"
#include "fanlasso/matrix.hpp"
#include "fanlasso/rng.hpp"
#include "fanlasso/simulate.hpp"

namespace fixture {

inline constexpr const char* kLabelColumn = "ViolentCrimesPerPop";

inline const std::vector<std::string>& crime_feature_names() {
  static const std::vector<std::string> names = {
      "population", "householdsize", "racepctblack", "racePctWhite", "racePctAsian",
      "racePctHisp", "agePct12t21", "agePct12t29", "agePct16t24", "agePct65up", "numbUrban",
      "pctUrban", "medIncome", "pctWWage", "pctWFarmSelf", "pctWInvInc", "pctWSocSec",
      "pctWPubAsst", "pctWRetire", "medFamInc", "perCapInc", "whitePerCap", "blackPerCap",
      "indianPerCap", "AsianPerCap", "OtherPerCap", "HispPerCap", "NumUnderPov",
      "PctPopUnderPov", "PctLess9thGrade", "PctNotHSGrad", "PctBSorMore", "PctUnemployed",
      "PctEmploy", "PctEmplManu", "PctEmplProfServ", "PctOccupManu", "PctOccupMgmtProf",
      "MalePctDivorce", "MalePctNevMarr", "FemalePctDiv", "TotalPctDiv", "PersPerFam",
      "PctFam2Par", "PctKids2Par", "PctYoungKids2Par", "PctTeen2Par", "PctWorkMomYoungKids",
      "PctWorkMom", "NumIlleg", "PctIlleg", "NumImmig", "PctImmigRecent", "PctImmigRec5",
      "PctImmigRec8", "PctImmigRec10", "PctRecentImmig", "PctRecImmig5", "PctRecImmig8",
      "PctRecImmig10", "PctSpeakEnglOnly", "PctNotSpeakEnglWell", "PctForeignBorn",
      "PctBornSameState", "PctSameHouse85", "PctSameCity85", "PctSameState85",
      "PctLargHouseFam", "PctLargHouseOccup", "PersPerOccupHous", "PersPerOwnOccHous",
      "PersPerRentOccHous", "PctPersOwnOccup", "PctPersDenseHous", "PctHousLess3BR",
      "MedNumBR", "HousVacant", "PctHousOccup", "PctHousOwnOcc", "PctVacantBoarded",
      "PctVacMore6Mos", "MedYrHousBuilt", "PctHousNoPhone", "PctWOFullPlumb", "OwnOccLowQuart",
      "OwnOccMedVal", "OwnOccHiQuart", "RentLowQ", "RentMedian", "RentHighQ", "MedRent",
      "MedRentPctHousInc", "MedOwnCostPctInc", "MedOwnCostPctIncNoMtg", "LemasSwornFT",
      "LemasSwFTPerPop", "LemasSwFTFieldOps", "LemasSwFTFieldPerPop", "LemasTotalReq",
      "LemasPctPolicOnPatr", "LemasGangUnitDeploy"};
  return names;
}

struct FixtureSpec {
  std::size_t n_source = 400;
  std::size_t n_target = 150;
  std::size_t r = 4;
  double covariate_shift = 0.1;  // loading perturbation between domains
  double noise_sd = 0.1;
  std::uint64_t seed = 7;
};

struct FixturePaths {
  std::string source_csv;
  std::string target_csv;
};

inline void write_labeled_csv(const std::string& path, const std::vector<std::string>& names,
                              const fanlasso::Matrix& x, const std::vector<double>& y) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  for (const std::string& name : names) out << name << ",";
  out << kLabelColumn << "\n";
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) out << fanlasso::format_double(x(i, j)) << ",";
    out << fanlasso::format_double(y[i]) << "\n";
  }
}

// Source labels follow the source truth function, target labels add the
// posterior shift; both domains share latent factors up to a small loading
// perturbation. Seed streams: 0 loadings, 1 source rows, 2 target rows.
inline FixturePaths write_crime_fixture(const std::string& dir, const FixtureSpec& spec) {
  using namespace fanlasso;
  const auto& names = crime_feature_names();
  const std::size_t p = names.size();

  Rng loadings(Rng::derive(spec.seed, 0));
  const Matrix b_p = gen_loading_source(p, spec.r, loadings);
  const Matrix b_q = gen_loading_target(b_p, spec.covariate_shift, loadings);

  auto make_domain = [&](const Matrix& b, std::size_t n, std::uint64_t stream, bool shifted) {
    Rng rng(Rng::derive(spec.seed, stream));
    FactorData data = gen_factor_data(b, n, rng);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double gp = gp_truth(data.f.row(i), data.u.row(i));
      const double truth = shifted ? gq_truth(data.f.row(i), data.u.row(i), gp) : gp;
      y[i] = truth + spec.noise_sd * rng.gaussian();
    }
    return std::pair<Matrix, std::vector<double>>{std::move(data.x), std::move(y)};
  };

  auto [x_p, y_p] = make_domain(b_p, spec.n_source, 1, false);
  auto [x_q, y_q] = make_domain(b_q, spec.n_target, 2, true);

  FixturePaths paths;
  paths.source_csv = dir + "/source.csv";
  paths.target_csv = dir + "/target.csv";
  write_labeled_csv(paths.source_csv, names, x_p, y_p);
  write_labeled_csv(paths.target_csv, names, x_q, y_q);
  return paths;
}

}  // namespace fixture
