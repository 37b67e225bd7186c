#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace fxfit::grad {

class Tape;

/// Handle to a vector-valued node on a tape.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    std::size_t size() const;
    const std::vector<double>& value() const;
    double scalar() const;
};

/// Maps dL/doutput to contributions to dL/dparent for each parent, in order.
/// Parent gradient vectors are pre-sized and must be accumulated into.
using Backward =
    std::function<void(std::span<const double> out_grad, std::span<std::vector<double>*> parent_grads)>;

/// Reverse-mode tape. Nodes are appended in evaluation order, which is a
/// topological order, so the reverse sweep is a single backward pass.
///
/// A tape created with `recording = false` evaluates values only; primitives
/// may skip caching what their reverse pass would need.
class Tape {
  public:
    explicit Tape(bool recording = true) : recording_(recording) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    bool recording() const noexcept { return recording_; }

    Var input(std::vector<double> value);
    Var push(std::vector<double> value, std::vector<Var> parents, Backward backward);

    const std::vector<double>& value(Var v) const { return nodes_.at(v.id).value; }
    std::size_t size() const noexcept { return nodes_.size(); }

    /// d output / d wrt for a scalar output.
    std::vector<double> gradient(Var output, Var wrt) const;

  private:
    struct Node {
        std::vector<double> value;
        std::vector<std::size_t> parents;
        Backward backward;
    };
    bool recording_;
    std::vector<Node> nodes_;
};

/// A scalar objective built from tape primitives.
using Loss = std::function<Var(Tape&, Var)>;

// Elementary primitives.
Var add(Var a, Var b);
Var scale(Var a, double k);
Var sum(Var a);
Var sum_of_squares(Var a);
Var sin(Var a);
Var tanh(Var a);
/// y = w x + b for a row-major (rows x x.size()) matrix.
Var affine(Var x, std::span<const double> w, std::span<const double> b);
/// Elementwise map with a user derivative. Used for test fixtures.
Var map(Var a, std::function<double(double)> f, std::function<double(double)> df);

/// Reverse-mode gradient of `loss` at `at`.
/// Throws non_finite when the loss is NaN/Inf, shape when it is not scalar.
std::vector<double> gradient(const Loss& loss, std::span<const double> at);
double evaluate(const Loss& loss, std::span<const double> at);

/// Central differences with h_i = step * max(1, |u_i|). pre: step > 0.
std::vector<double> finite_difference_gradient(const Loss& loss, std::span<const double> at, double step);

struct GradEntry {
    std::string name;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_err = 0.0;
};

struct GradReport {
    std::vector<GradEntry> entries;
    double max_rel_err = 0.0;
    bool pass = false;
};

inline constexpr double kGradCheckTolerance = 1e-3;
inline constexpr double kGradCheckFloor = 1e-7;
inline constexpr double kGradRelErrFloor = 1e-6;
inline constexpr double kDefaultFdStep = 3e-6;
/// Share of the tolerance that probe rounding may take before the step widens.
inline constexpr double kFdRoundoffShare = 0.1;
/// Widest step, relative to max(1, |u|).
inline constexpr double kMaxFdStep = 1e-2;

/// `names` may be empty (entries are then numbered).
GradReport gradient_check(const Loss& loss, std::span<const double> at, double step,
                          std::span<const std::string> names = {});

nlohmann::json to_json(const GradReport& report);

}  // namespace fxfit::grad
