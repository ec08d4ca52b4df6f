#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sharplab/dataset.hpp"
#include "sharplab/linalg.hpp"
#include "sharplab/param_vector.hpp"

namespace sharplab {

enum class ObjectiveKind { quadratic, rosenbrock, sharp_flat, mlp_classifier };
enum class Activation { tanh, relu };

std::string to_string(ObjectiveKind kind);
std::string to_string(Activation act);
ObjectiveKind parse_objective_kind(const std::string& name);
Activation parse_activation(const std::string& name);

/// L(w) = 1/2 w'Aw - b'w.
struct QuadraticModel {
    Matrix a;
    std::vector<double> b;
};

/// Chained Rosenbrock: sum_i  b (w[i+1] - w[i]^2)^2 + (a - w[i])^2.
struct RosenbrockModel {
    std::size_t dim = 2;
    double a = 1.0;
    double b = 100.0;
};

/// Two-basin landscape on R^2.
///
/// The flat basin is an inverted Gaussian of depth `flat_depth` and width
/// `width_flat` centred at (+separation/2, 0). The sharp basin is a compactly
/// supported well of radius `width_sharp` centred at (-separation/2, 0):
///
///     S(w) = psi(|w - c_s|^2 / width_sharp^2) * (-well_depth + tilt . (w - c_s)),
///     psi(u) = (1 - u)^3 on u < 1, else 0.
///
/// `tilt` cancels the Gaussian slope at c_s, so both centres are exact
/// stationary points, and `well_depth` is chosen so the sharp minimum sits
/// `depth_gap` below the flat one. Built by make_sharp_flat.
struct SharpFlatModel {
    double width_sharp = 0.15;
    double width_flat = 1.0;
    double depth_gap = 0.1;
    double separation = 1.5;
    double flat_depth = 1.0;

    std::array<double, 2> sharp_center{};
    std::array<double, 2> flat_center{};
    double well_depth = 0.0;
    std::array<double, 2> tilt{};
};

/// Fully connected classifier: widths = {inputs, hidden..., classes};
/// hidden layers use `activation`, output is softmax cross-entropy.
struct MlpModel {
    std::vector<std::size_t> widths{2, 16, 2};
    Activation activation = Activation::tanh;
};

using ObjectiveModel = std::variant<QuadraticModel, RosenbrockModel, SharpFlatModel, MlpModel>;

struct ObjectiveSpec {
    ObjectiveModel model;
    /// lambda in the lambda*||w||^2 term folded into the loss.
    double weight_decay = 0.0;

    ObjectiveKind kind() const;
    std::size_t parameter_count() const;
    /// Only the MLP consumes batches; analytic landscapes ignore them.
    bool uses_data() const { return kind() == ObjectiveKind::mlp_classifier; }
    /// Named segment layout of the flat parameter vector.
    std::vector<Segment> layout() const;
    /// Throws ConfigError on violated invariants.
    void validate() const;
};

ObjectiveSpec make_quadratic(Matrix a, std::vector<double> b, double weight_decay = 0.0);
ObjectiveSpec make_rosenbrock(std::size_t dim = 2, double a = 1.0, double b = 100.0, double weight_decay = 0.0);
ObjectiveSpec make_sharp_flat(double width_sharp, double width_flat, double depth_gap, double separation);
ObjectiveSpec make_mlp(std::vector<std::size_t> widths, Activation act, double weight_decay = 0.0);

struct LossGrad {
    double loss = 0.0;
    std::vector<double> grad;
};

/// Mean loss over the batch plus lambda*||w||^2.
double eval_loss(const ObjectiveSpec& spec, std::span<const double> w, const Batch& batch);
LossGrad eval_grad(const ObjectiveSpec& spec, std::span<const double> w, const Batch& batch);

inline double eval_loss(const ObjectiveSpec& spec, const ParamVector& w, const Batch& batch) {
    return eval_loss(spec, w.values(), batch);
}
inline LossGrad eval_grad(const ObjectiveSpec& spec, const ParamVector& w, const Batch& batch) {
    return eval_grad(spec, w.values(), batch);
}

/// Central differences (L(w + h e_i) - L(w - h e_i)) / 2h for every coordinate.
std::vector<double> fd_gradient(const ObjectiveSpec& spec, std::span<const double> w, const Batch& batch, double h);

/// Max over coordinates of |a - b| / max(1, |a|, |b|).
double max_relative_error(std::span<const double> a, std::span<const double> b);

/// Classification accuracy in [0, 1] (MLP only).
double accuracy(const ObjectiveSpec& spec, std::span<const double> w, const Batch& batch);

/// Seeded initial parameters: Glorot-uniform weights and zero biases for the
/// MLP, standard normal coordinates for analytic landscapes.
ParamVector init_params(const ObjectiveSpec& spec, std::uint64_t seed);

enum class Basin { sharp, flat, neither };
std::string to_string(Basin basin);

/// Sharp if inside the sharp well's support, flat if within two widths of the flat centre.
Basin classify_basin(const SharpFlatModel& model, std::span<const double> w);

}  // namespace sharplab
