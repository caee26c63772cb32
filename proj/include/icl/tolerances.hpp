#pragma once

// Every numerical tolerance used by tests, the acceptance suite and the
// property runs lives here.

namespace icl::tol {

inline constexpr double kPriorWeightSum = 1e-12;
inline constexpr double kAlgebraic = 1e-10;
inline constexpr double kRatioRelative = 1e-8;
inline constexpr double kIdentityCheck = 1e-9;
inline constexpr double kTheoremSlack = 1e-10;

inline constexpr double kOracleSigmas = 3.0;
inline constexpr int kOracleInstances = 50;
inline constexpr int kOracleRequiredAgreements = 48;
inline constexpr double kQuadratureAgreement = 1e-4;
inline constexpr double kMinEffectiveSampleSize = 50.0;

inline constexpr double kAsymptoticRelative = 0.05;

inline constexpr double kGradientRelative = 1e-5;
inline constexpr double kFiniteDifferenceStep = 1e-5;

inline constexpr double kDoubleDescentFactor = 1.5;
inline constexpr double kRetrievalAccuracy = 0.90;
// Mismatch control counts as near chance when its accuracy stays within this
// margin of the random-context-label baseline.
inline constexpr double kNearChanceMargin = 0.10;

inline constexpr double kDistanceAbsolute = 0.01;
inline constexpr double kPseudoInverseCutoff = 1e-10;
inline constexpr double kDivergenceLoss = 1e12;
inline constexpr double kStochasticRows = 1e-6;

}  // namespace icl::tol
