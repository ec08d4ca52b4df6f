#include "sharplab/objective.hpp"

#include <algorithm>
#include <cmath>

#include "sharplab/error.hpp"
#include "sharplab/random.hpp"

namespace sharplab {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

void require_finite(double value, const char* what) {
    if (!std::isfinite(value)) throw NumericError(std::string("non-finite ") + what);
}

// ---- quadratic --------------------------------------------------------------

double quadratic_loss(const QuadraticModel& m, std::span<const double> w) {
    const auto aw = matvec(m.a, w);
    return 0.5 * dot(w, aw) - dot(m.b, w);
}

void quadratic_grad(const QuadraticModel& m, std::span<const double> w, LossGrad& out) {
    auto aw = matvec(m.a, w);
    out.loss = 0.5 * dot(w, aw) - dot(m.b, w);
    for (std::size_t i = 0; i < aw.size(); ++i) aw[i] -= m.b[i];
    out.grad = std::move(aw);
}

// ---- rosenbrock -------------------------------------------------------------

double rosenbrock_loss(const RosenbrockModel& m, std::span<const double> w) {
    double f = 0.0;
    for (std::size_t i = 0; i + 1 < m.dim; ++i) {
        const double t1 = w[i + 1] - w[i] * w[i];
        const double t2 = m.a - w[i];
        f += m.b * t1 * t1 + t2 * t2;
    }
    return f;
}

void rosenbrock_grad(const RosenbrockModel& m, std::span<const double> w, LossGrad& out) {
    out.loss = rosenbrock_loss(m, w);
    out.grad.assign(m.dim, 0.0);
    for (std::size_t i = 0; i + 1 < m.dim; ++i) {
        const double t1 = w[i + 1] - w[i] * w[i];
        const double t2 = m.a - w[i];
        out.grad[i] += -4.0 * m.b * w[i] * t1 - 2.0 * t2;
        out.grad[i + 1] += 2.0 * m.b * t1;
    }
}

// ---- sharp / flat -----------------------------------------------------------

struct SharpFlatTerms {
    double value;
    std::array<double, 2> grad;
};

SharpFlatTerms sharp_flat_terms(const SharpFlatModel& m, std::span<const double> w) {
    const double sigma2 = m.width_flat * m.width_flat;
    const double fx = w[0] - m.flat_center[0];
    const double fy = w[1] - m.flat_center[1];
    const double gauss = std::exp(-(fx * fx + fy * fy) / (2.0 * sigma2));

    SharpFlatTerms t{};
    t.value = -m.flat_depth * gauss;
    t.grad = {m.flat_depth * gauss * fx / sigma2, m.flat_depth * gauss * fy / sigma2};

    const double sx = w[0] - m.sharp_center[0];
    const double sy = w[1] - m.sharp_center[1];
    const double ws2 = m.width_sharp * m.width_sharp;
    const double u = (sx * sx + sy * sy) / ws2;
    if (u < 1.0) {
        const double one_minus = 1.0 - u;
        const double psi = one_minus * one_minus * one_minus;
        const double dpsi_du = -3.0 * one_minus * one_minus;
        const double lin = -m.well_depth + m.tilt[0] * sx + m.tilt[1] * sy;
        t.value += psi * lin;
        t.grad[0] += dpsi_du * (2.0 * sx / ws2) * lin + psi * m.tilt[0];
        t.grad[1] += dpsi_du * (2.0 * sy / ws2) * lin + psi * m.tilt[1];
    }
    return t;
}

// ---- mlp --------------------------------------------------------------------

struct LayerView {
    std::size_t in;
    std::size_t out;
    std::size_t weight_offset;
    std::size_t bias_offset;
};

std::vector<LayerView> mlp_layers(const MlpModel& m) {
    std::vector<LayerView> layers;
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < m.widths.size(); ++l) {
        LayerView v{m.widths[l], m.widths[l + 1], offset, offset + m.widths[l] * m.widths[l + 1]};
        offset = v.bias_offset + v.out;
        layers.push_back(v);
    }
    return layers;
}

double activate(Activation act, double z) { return act == Activation::tanh ? std::tanh(z) : (z > 0.0 ? z : 0.0); }

double activation_slope(Activation act, double z, double a) {
    return act == Activation::tanh ? 1.0 - a * a : (z > 0.0 ? 1.0 : 0.0);
}

void check_batch(const MlpModel& m, const Batch& batch) {
    if (batch.empty()) throw ConfigError("mlp objective needs a non-empty batch");
    batch.validate();
    if (batch.dim != m.widths.front())
        throw ConfigError("batch input dimension " + std::to_string(batch.dim) + " does not match mlp input width " +
                          std::to_string(m.widths.front()));
    const auto classes = static_cast<int>(m.widths.back());
    for (int t : batch.targets)
        if (t < 0 || t >= classes) throw ConfigError("batch target outside [0, classes)");
}

// Forward pass for one example; fills pre-activations and activations per layer.
void mlp_forward(const MlpModel& m, const std::vector<LayerView>& layers, std::span<const double> w,
                 std::span<const double> x, std::vector<std::vector<double>>& z, std::vector<std::vector<double>>& a) {
    a[0].assign(x.begin(), x.end());
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& L = layers[l];
        z[l].assign(L.out, 0.0);
        for (std::size_t o = 0; o < L.out; ++o) {
            double acc = w[L.bias_offset + o];
            const double* row = w.data() + L.weight_offset + o * L.in;
            for (std::size_t i = 0; i < L.in; ++i) acc += row[i] * a[l][i];
            z[l][o] = acc;
        }
        if (l + 1 < layers.size()) {
            a[l + 1].resize(L.out);
            for (std::size_t o = 0; o < L.out; ++o) a[l + 1][o] = activate(m.activation, z[l][o]);
        }
    }
}

double cross_entropy(std::span<const double> logits, int target, std::vector<double>* probs) {
    const double zmax = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - zmax);
    const double lse = zmax + std::log(sum);
    if (probs) {
        probs->resize(logits.size());
        for (std::size_t k = 0; k < logits.size(); ++k) (*probs)[k] = std::exp(logits[k] - lse);
    }
    return lse - logits[static_cast<std::size_t>(target)];
}

double mlp_loss(const MlpModel& m, std::span<const double> w, const Batch& batch) {
    check_batch(m, batch);
    const auto layers = mlp_layers(m);
    std::vector<std::vector<double>> z(layers.size()), a(layers.size());
    double total = 0.0;
    for (std::size_t r = 0; r < batch.size(); ++r) {
        mlp_forward(m, layers, w, batch.row(r), z, a);
        total += cross_entropy(z.back(), batch.targets[r], nullptr);
    }
    return total / static_cast<double>(batch.size());
}

void mlp_grad(const MlpModel& m, std::span<const double> w, const Batch& batch, LossGrad& out) {
    check_batch(m, batch);
    const auto layers = mlp_layers(m);
    std::vector<std::vector<double>> z(layers.size()), a(layers.size()), delta(layers.size());
    std::vector<double> probs;
    out.grad.assign(w.size(), 0.0);
    double total = 0.0;

    for (std::size_t r = 0; r < batch.size(); ++r) {
        mlp_forward(m, layers, w, batch.row(r), z, a);
        const int target = batch.targets[r];
        total += cross_entropy(z.back(), target, &probs);

        delta.back() = probs;
        delta.back()[static_cast<std::size_t>(target)] -= 1.0;

        for (std::size_t l = layers.size(); l-- > 0;) {
            const auto& L = layers[l];
            for (std::size_t o = 0; o < L.out; ++o) {
                const double d = delta[l][o];
                out.grad[L.bias_offset + o] += d;
                double* grow = out.grad.data() + L.weight_offset + o * L.in;
                for (std::size_t i = 0; i < L.in; ++i) grow[i] += d * a[l][i];
            }
            if (l == 0) break;
            auto& prev = delta[l - 1];
            prev.assign(L.in, 0.0);
            for (std::size_t o = 0; o < L.out; ++o) {
                const double d = delta[l][o];
                const double* row = w.data() + L.weight_offset + o * L.in;
                for (std::size_t i = 0; i < L.in; ++i) prev[i] += row[i] * d;
            }
            for (std::size_t i = 0; i < L.in; ++i)
                prev[i] *= activation_slope(m.activation, z[l - 1][i], a[l][i]);
        }
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (double& g : out.grad) g *= inv;
    out.loss = total * inv;
}

void check_params(const ObjectiveSpec& spec, std::span<const double> w) {
    if (w.size() != spec.parameter_count())
        throw ConfigError("parameter vector has length " + std::to_string(w.size()) + ", objective expects " +
                          std::to_string(spec.parameter_count()));
}

double squared_norm(std::span<const double> w) {
    double acc = 0.0;
    for (double x : w) acc += x * x;
    return acc;
}

}  // namespace

std::string to_string(ObjectiveKind kind) {
    switch (kind) {
        case ObjectiveKind::quadratic: return "quadratic";
        case ObjectiveKind::rosenbrock: return "rosenbrock";
        case ObjectiveKind::sharp_flat: return "sharp_flat";
        case ObjectiveKind::mlp_classifier: return "mlp_classifier";
    }
    return "?";
}

std::string to_string(Activation act) { return act == Activation::tanh ? "tanh" : "relu"; }

ObjectiveKind parse_objective_kind(const std::string& name) {
    if (name == "quadratic") return ObjectiveKind::quadratic;
    if (name == "rosenbrock") return ObjectiveKind::rosenbrock;
    if (name == "sharp_flat") return ObjectiveKind::sharp_flat;
    if (name == "mlp_classifier") return ObjectiveKind::mlp_classifier;
    throw ConfigError("unknown objective kind '" + name + "'");
}

Activation parse_activation(const std::string& name) {
    if (name == "tanh") return Activation::tanh;
    if (name == "relu") return Activation::relu;
    throw ConfigError("unknown activation '" + name + "'");
}

std::string to_string(Basin basin) {
    switch (basin) {
        case Basin::sharp: return "sharp";
        case Basin::flat: return "flat";
        case Basin::neither: return "neither";
    }
    return "?";
}

ObjectiveKind ObjectiveSpec::kind() const {
    return std::visit(overloaded{[](const QuadraticModel&) { return ObjectiveKind::quadratic; },
                                 [](const RosenbrockModel&) { return ObjectiveKind::rosenbrock; },
                                 [](const SharpFlatModel&) { return ObjectiveKind::sharp_flat; },
                                 [](const MlpModel&) { return ObjectiveKind::mlp_classifier; }},
                      model);
}

std::size_t ObjectiveSpec::parameter_count() const {
    return std::visit(overloaded{[](const QuadraticModel& m) { return m.a.rows(); },
                                 [](const RosenbrockModel& m) { return m.dim; },
                                 [](const SharpFlatModel&) { return std::size_t{2}; },
                                 [](const MlpModel& m) {
                                     std::size_t n = 0;
                                     for (std::size_t l = 0; l + 1 < m.widths.size(); ++l)
                                         n += m.widths[l] * m.widths[l + 1] + m.widths[l + 1];
                                     return n;
                                 }},
                      model);
}

std::vector<Segment> ObjectiveSpec::layout() const {
    if (const auto* mlp = std::get_if<MlpModel>(&model)) {
        std::vector<Segment> segs;
        for (const auto& L : mlp_layers(*mlp)) {
            const std::string prefix = "dense" + std::to_string(segs.size() / 2);
            segs.push_back({prefix + ".weight", L.weight_offset, L.in * L.out});
            segs.push_back({prefix + ".bias", L.bias_offset, L.out});
        }
        return segs;
    }
    return {{"w", 0, parameter_count()}};
}

void ObjectiveSpec::validate() const {
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) throw ConfigError("weight_decay must be >= 0");
    std::visit(overloaded{[](const QuadraticModel& m) {
                              if (!m.a.square() || m.a.rows() == 0) throw ConfigError("quadratic: A must be square");
                              if (!m.a.is_symmetric()) throw ConfigError("quadratic: A must be symmetric");
                              if (m.b.size() != m.a.rows()) throw ConfigError("quadratic: b has wrong length");
                          },
                          [](const RosenbrockModel& m) {
                              if (m.dim < 2) throw ConfigError("rosenbrock: dim must be >= 2");
                          },
                          [](const SharpFlatModel& m) {
                              if (!(m.width_sharp > 0.0 && m.width_sharp < m.width_flat))
                                  throw ConfigError("sharp_flat: need 0 < width_sharp < width_flat");
                              if (!(m.separation > m.width_sharp))
                                  throw ConfigError("sharp_flat: separation must exceed width_sharp");
                              if (!(m.depth_gap >= 0.0)) throw ConfigError("sharp_flat: depth_gap must be >= 0");
                          },
                          [](const MlpModel& m) {
                              if (m.widths.size() < 2) throw ConfigError("mlp: need input and output widths");
                              for (auto w : m.widths)
                                  if (w < 1) throw ConfigError("mlp: layer widths must be >= 1");
                          }},
               model);
}

ObjectiveSpec make_quadratic(Matrix a, std::vector<double> b, double weight_decay) {
    ObjectiveSpec spec{QuadraticModel{std::move(a), std::move(b)}, weight_decay};
    spec.validate();
    return spec;
}

ObjectiveSpec make_rosenbrock(std::size_t dim, double a, double b, double weight_decay) {
    ObjectiveSpec spec{RosenbrockModel{dim, a, b}, weight_decay};
    spec.validate();
    return spec;
}

ObjectiveSpec make_sharp_flat(double width_sharp, double width_flat, double depth_gap, double separation) {
    if (!(width_sharp > 0.0 && width_sharp < width_flat))
        throw ConfigError("make_sharp_flat: need 0 < width_sharp < width_flat");
    if (!(separation > 0.0)) throw ConfigError("make_sharp_flat: separation must be > 0");
    if (!(separation > width_sharp)) throw ConfigError("make_sharp_flat: separation must exceed width_sharp");
    if (!(depth_gap >= 0.0)) throw ConfigError("make_sharp_flat: depth_gap must be >= 0");

    SharpFlatModel m;
    m.width_sharp = width_sharp;
    m.width_flat = width_flat;
    m.depth_gap = depth_gap;
    m.separation = separation;
    m.sharp_center = {-0.5 * separation, 0.0};
    m.flat_center = {0.5 * separation, 0.0};

    const double sigma2 = width_flat * width_flat;
    const double gauss = std::exp(-separation * separation / (2.0 * sigma2));
    // Gaussian gradient at the sharp centre, cancelled by the tilt.
    const double slope_x = m.flat_depth * gauss * (m.sharp_center[0] - m.flat_center[0]) / sigma2;
    m.tilt = {-slope_x, 0.0};
    m.well_depth = m.flat_depth * (1.0 - gauss) + depth_gap;

    // Curvature along x and y at each centre.
    const double flat_curv = m.flat_depth / sigma2;
    const double well_curv = 6.0 * m.well_depth / (width_sharp * width_sharp);
    const double sharp_xx = m.flat_depth * gauss * (1.0 / sigma2 - separation * separation / (sigma2 * sigma2)) + well_curv;
    const double sharp_yy = m.flat_depth * gauss / sigma2 + well_curv;
    if (!(sharp_xx > flat_curv && sharp_yy > flat_curv))
        throw ConfigError("make_sharp_flat: parameters do not make the sharp basin sharper than the flat one");

    return ObjectiveSpec{m, 0.0};
}

ObjectiveSpec make_mlp(std::vector<std::size_t> widths, Activation act, double weight_decay) {
    ObjectiveSpec spec{MlpModel{std::move(widths), act}, weight_decay};
    spec.validate();
    return spec;
}

double eval_loss(const ObjectiveSpec& spec, std::span<const double> w, const Batch& batch) {
    check_params(spec, w);
    const double base = std::visit(overloaded{[&](const QuadraticModel& m) { return quadratic_loss(m, w); },
                                              [&](const RosenbrockModel& m) { return rosenbrock_loss(m, w); },
                                              [&](const SharpFlatModel& m) { return sharp_flat_terms(m, w).value; },
                                              [&](const MlpModel& m) { return mlp_loss(m, w, batch); }},
                                   spec.model);
    const double loss = spec.weight_decay > 0.0 ? base + spec.weight_decay * squared_norm(w) : base;
    require_finite(loss, "loss");
    return loss;
}

LossGrad eval_grad(const ObjectiveSpec& spec, std::span<const double> w, const Batch& batch) {
    check_params(spec, w);
    LossGrad out;
    std::visit(overloaded{[&](const QuadraticModel& m) { quadratic_grad(m, w, out); },
                          [&](const RosenbrockModel& m) { rosenbrock_grad(m, w, out); },
                          [&](const SharpFlatModel& m) {
                              const auto t = sharp_flat_terms(m, w);
                              out.loss = t.value;
                              out.grad = {t.grad[0], t.grad[1]};
                          },
                          [&](const MlpModel& m) { mlp_grad(m, w, batch, out); }},
               spec.model);
    if (spec.weight_decay > 0.0) {
        out.loss += spec.weight_decay * squared_norm(w);
        for (std::size_t i = 0; i < w.size(); ++i) out.grad[i] += 2.0 * spec.weight_decay * w[i];
    }
    require_finite(out.loss, "loss");
    for (double g : out.grad) require_finite(g, "gradient");
    return out;
}

std::vector<double> fd_gradient(const ObjectiveSpec& spec, std::span<const double> w, const Batch& batch, double h) {
    if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("fd_gradient: step must be > 0");
    std::vector<double> probe(w.begin(), w.end());
    std::vector<double> g(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        probe[i] = w[i] + h;
        const double up = eval_loss(spec, probe, batch);
        probe[i] = w[i] - h;
        const double down = eval_loss(spec, probe, batch);
        probe[i] = w[i];
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

double max_relative_error(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ConfigError("max_relative_error: length mismatch");
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double scale = std::max({1.0, std::abs(a[i]), std::abs(b[i])});
        worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
    }
    return worst;
}

double accuracy(const ObjectiveSpec& spec, std::span<const double> w, const Batch& batch) {
    const auto* m = std::get_if<MlpModel>(&spec.model);
    if (!m) throw ConfigError("accuracy is defined for the mlp classifier only");
    check_params(spec, w);
    check_batch(*m, batch);
    const auto layers = mlp_layers(*m);
    std::vector<std::vector<double>> z(layers.size()), a(layers.size());
    std::size_t correct = 0;
    for (std::size_t r = 0; r < batch.size(); ++r) {
        mlp_forward(*m, layers, w, batch.row(r), z, a);
        const auto& logits = z.back();
        const auto pred = static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
        correct += pred == batch.targets[r];
    }
    return static_cast<double>(correct) / static_cast<double>(batch.size());
}

ParamVector init_params(const ObjectiveSpec& spec, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> values(spec.parameter_count(), 0.0);
    if (const auto* m = std::get_if<MlpModel>(&spec.model)) {
        for (const auto& L : mlp_layers(*m)) {
            const double limit = std::sqrt(6.0 / static_cast<double>(L.in + L.out));
            for (std::size_t k = 0; k < L.in * L.out; ++k) values[L.weight_offset + k] = rng.uniform(-limit, limit);
        }
    } else {
        for (double& v : values) v = rng.normal();
    }
    return ParamVector(std::move(values), spec.layout());
}

Basin classify_basin(const SharpFlatModel& model, std::span<const double> w) {
    const double ds = std::hypot(w[0] - model.sharp_center[0], w[1] - model.sharp_center[1]);
    if (ds < model.width_sharp) return Basin::sharp;
    const double df = std::hypot(w[0] - model.flat_center[0], w[1] - model.flat_center[1]);
    if (df < 2.0 * model.width_flat) return Basin::flat;
    return Basin::neither;
}

}  // namespace sharplab
