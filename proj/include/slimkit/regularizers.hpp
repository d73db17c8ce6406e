#pragma once

// Sparse penalties applied to batch-normalization scaling factors.
//
// Each penalty is separable, R(z) = sum_i r(z_i), with r even, continuous,
// nondecreasing on [0, inf), r(0) = 0 and differentiable away from 0. The
// global regularization strength is applied by the caller; MCP and SCAD keep
// their own breakpoint scale `lambda_internal`, which is 1 in normal use.

#include <span>
#include <string>
#include <vector>

namespace slim {

enum class PenaltyKind { L1, Lp, TL1, MCP, SCAD };

class RegularizerSpec {
 public:
  static RegularizerSpec l1();
  /// Sum of |z_i|^p, 0 < p < 1.
  static RegularizerSpec lp(double p);
  /// Transformed l1, a > 0.
  static RegularizerSpec tl1(double a);
  /// a > 1.
  static RegularizerSpec mcp(double a, double lambda_internal = 1.0);
  /// a > 2.
  static RegularizerSpec scad(double a, double lambda_internal = 1.0);

  PenaltyKind kind() const noexcept { return kind_; }
  double p() const noexcept { return p_; }
  double a() const noexcept { return a_; }
  double lambda_internal() const noexcept { return lambda_; }

  /// Per-component penalty r(t).
  double value(double t) const;
  /// Element of the limiting subdifferential of r at t; 0 is selected at t = 0.
  double subgradient(double t) const;

  /// Short label such as "l1", "lp(0.5)", "tl1(a=0.5)".
  std::string label() const;

  bool operator==(const RegularizerSpec&) const = default;

 private:
  RegularizerSpec(PenaltyKind kind, double p, double a, double lambda)
      : kind_(kind), p_(p), a_(a), lambda_(lambda) {}

  PenaltyKind kind_;
  double p_;
  double a_;
  double lambda_;
};

/// Rule used to pick a descent direction from the subdifferential at 0.
enum class SubgradientPolicy { SelectZero };

/// Sum of r(z_i). Throws InvalidInput on non-finite entries.
double penalty_value(const RegularizerSpec& spec, std::span<const double> z);

std::vector<double> penalty_subgradient(const RegularizerSpec& spec, std::span<const double> z,
                                        SubgradientPolicy policy = SubgradientPolicy::SelectZero);

/// Parses "l1", "lp:P", "tl1:A", "mcp:A", "scad:A". "none" is handled by callers.
RegularizerSpec parse_regularizer(const std::string& text);

}  // namespace slim
