#include "porkcast/neural.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "porkcast/errors.hpp"
#include "porkcast/hash.hpp"

namespace porkcast {

std::string to_string(NetKind kind) { return kind == NetKind::RNN ? "rnn" : "lstm"; }

std::string to_string(Activation activation) {
    switch (activation) {
        case Activation::ReLU: return "relu";
        case Activation::Tanh: return "tanh";
        case Activation::Identity: return "identity";
    }
    return "relu";
}

NetKind net_kind_from_string(const std::string& s) {
    if (s == "rnn") return NetKind::RNN;
    if (s == "lstm") return NetKind::LSTM;
    throw std::invalid_argument("unknown network kind: " + s);
}

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::ReLU;
    if (s == "tanh") return Activation::Tanh;
    if (s == "identity" || s == "linear") return Activation::Identity;
    throw std::invalid_argument("unknown activation: " + s);
}

NetSpec NetSpec::rnn_default() { return NetSpec{}; }

NetSpec NetSpec::lstm_default() {
    NetSpec s;
    s.kind = NetKind::LSTM;
    s.layer_sizes = {200, 100, 50, 1};
    return s;
}

void NetSpec::validate() const {
    if (layer_sizes.empty()) throw std::invalid_argument("layer_sizes must not be empty");
    for (int n : layer_sizes) {
        if (n < 1) throw std::invalid_argument("layer sizes must be >= 1");
    }
    if (layer_sizes.back() != 1) throw std::invalid_argument("the output layer must have size 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must lie in [0, 1)");
    if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (!(adam.learning_rate >= 0.0)) throw std::invalid_argument("learning rate must be >= 0");
}

namespace {

struct Shapes {
    int gates = 1;  // 1 for RNN, 4 for LSTM (i, f, g, o)
    std::vector<int> in;
    std::vector<int> hidden;
    std::vector<std::size_t> offset;
    int out_in = 0;
    std::size_t out_offset = 0;
    std::size_t total = 0;
};

Shapes shapes_of(const NetSpec& spec, const InputLayout& layout) {
    if (layout.time_steps < 1 || layout.step_features < 1) throw std::invalid_argument("empty input layout");
    Shapes s;
    s.gates = spec.kind == NetKind::LSTM ? 4 : 1;
    int in = layout.step_features;
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
        const int h = spec.layer_sizes[l];
        s.in.push_back(in);
        s.hidden.push_back(h);
        s.offset.push_back(off);
        const auto gh = static_cast<std::size_t>(s.gates * h);
        off += gh * static_cast<std::size_t>(in) + gh * static_cast<std::size_t>(h) + gh;
        in = h;
    }
    s.out_in = s.hidden.empty() ? layout.time_steps * layout.step_features : in;
    s.out_offset = off;
    s.total = off + static_cast<std::size_t>(s.out_in) + 1;
    return s;
}

using CMap = Eigen::Map<const Eigen::MatrixXd>;
using MMap = Eigen::Map<Eigen::MatrixXd>;
using CVMap = Eigen::Map<const Eigen::VectorXd>;
using MVMap = Eigen::Map<Eigen::VectorXd>;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Eigen::VectorXd activate(Activation a, const Eigen::VectorXd& z) {
    switch (a) {
        case Activation::ReLU: return z.cwiseMax(0.0);
        case Activation::Tanh: return z.array().tanh().matrix();
        case Activation::Identity: return z;
    }
    return z;
}

Eigen::VectorXd activate_grad(Activation a, const Eigen::VectorXd& z) {
    switch (a) {
        case Activation::ReLU: return (z.array() > 0.0).cast<double>().matrix();
        case Activation::Tanh: return (1.0 - z.array().tanh().square()).matrix();
        case Activation::Identity: return Eigen::VectorXd::Ones(z.size());
    }
    return Eigen::VectorXd::Ones(z.size());
}

using Sequence = std::vector<Eigen::VectorXd>;  // standardized inputs, one vector per step

struct LayerTrace {
    Sequence x;      // inputs
    Sequence pre;    // RNN: pre-activation; LSTM: candidate pre-activation
    Sequence gates;  // LSTM: i, f, g, o after activation
    Sequence c;      // LSTM cell state
    Sequence h;      // outputs before dropout
    Sequence mask;   // dropout multipliers (empty when disabled)
};

struct Trace {
    std::vector<LayerTrace> layers;
    Eigen::VectorXd top;  // output-layer input
    double out = 0.0;
};

class Network {
public:
    Network(const NetSpec& spec, const InputLayout& layout) : spec_(spec), s_(shapes_of(spec, layout)) {}

    const Shapes& shapes() const { return s_; }

    /// Forward pass; `rng` non-null enables training-mode dropout.
    double forward(const double* p, const Sequence& input, Trace& tr, std::mt19937_64* rng) const {
        const bool drop = rng != nullptr && spec_.dropout > 0.0;
        const double keep = 1.0 - spec_.dropout;
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        tr.layers.assign(s_.hidden.size(), LayerTrace{});
        const Sequence* seq = &input;
        Sequence cur;
        Sequence next;
        for (std::size_t l = 0; l < s_.hidden.size(); ++l) {
            const int I = s_.in[l];
            const int H = s_.hidden[l];
            const int G = s_.gates * H;
            const double* base = p + s_.offset[l];
            CMap W(base, G, I);
            CMap U(base + static_cast<std::size_t>(G) * I, G, H);
            CVMap b(base + static_cast<std::size_t>(G) * (I + H), G);
            LayerTrace& lt = tr.layers[l];
            Eigen::VectorXd h_prev = Eigen::VectorXd::Zero(H);
            Eigen::VectorXd c_prev = Eigen::VectorXd::Zero(H);
            next.assign(seq->size(), Eigen::VectorXd());
            for (std::size_t t = 0; t < seq->size(); ++t) {
                const Eigen::VectorXd& x = (*seq)[t];
                Eigen::VectorXd z = W * x + U * h_prev + b;
                Eigen::VectorXd h;
                if (spec_.kind == NetKind::RNN) {
                    h = activate(spec_.activation, z);
                    lt.pre.push_back(std::move(z));
                } else {
                    Eigen::VectorXd g(G);
                    for (int k = 0; k < H; ++k) {
                        g(k) = sigmoid(z(k));
                        g(H + k) = sigmoid(z(H + k));
                        g(3 * H + k) = sigmoid(z(3 * H + k));
                    }
                    Eigen::VectorXd zg = z.segment(2 * H, H);
                    g.segment(2 * H, H) = activate(spec_.activation, zg);
                    Eigen::VectorXd c = g.segment(H, H).cwiseProduct(c_prev) +
                                        g.segment(0, H).cwiseProduct(g.segment(2 * H, H));
                    h = g.segment(3 * H, H).cwiseProduct(activate(spec_.activation, c));
                    lt.pre.push_back(std::move(zg));
                    lt.gates.push_back(std::move(g));
                    lt.c.push_back(c);
                    c_prev = std::move(c);
                }
                lt.x.push_back(x);
                lt.h.push_back(h);
                h_prev = h;
                if (drop) {
                    Eigen::VectorXd m(H);
                    for (int k = 0; k < H; ++k) m(k) = unif(*rng) < keep ? 1.0 / keep : 0.0;
                    next[t] = h.cwiseProduct(m);
                    lt.mask.push_back(std::move(m));
                } else {
                    next[t] = std::move(h);
                }
            }
            cur = std::move(next);
            seq = &cur;
        }
        if (s_.hidden.empty()) {
            tr.top.resize(s_.out_in);
            Eigen::Index k = 0;
            for (const auto& x : input) {
                tr.top.segment(k, x.size()) = x;
                k += x.size();
            }
        } else {
            tr.top = seq->back();
        }
        CVMap v(p + s_.out_offset, s_.out_in);
        tr.out = v.dot(tr.top) + p[s_.out_offset + static_cast<std::size_t>(s_.out_in)];
        return tr.out;
    }

    /// Accumulates d(scale * out)/d(params) into `grad`.
    void backward(const double* p, const Trace& tr, double scale, double* grad) const {
        const std::size_t T = tr.layers.empty() ? 0 : tr.layers.back().h.size();
        MVMap gv(grad + s_.out_offset, s_.out_in);
        gv += scale * tr.top;
        grad[s_.out_offset + static_cast<std::size_t>(s_.out_in)] += scale;
        if (s_.hidden.empty()) return;

        CVMap v(p + s_.out_offset, s_.out_in);
        Sequence d_out(T);
        for (std::size_t t = 0; t < T; ++t) d_out[t] = Eigen::VectorXd::Zero(s_.hidden.back());
        d_out[T - 1] = scale * v;

        for (std::size_t li = s_.hidden.size(); li-- > 0;) {
            const int I = s_.in[li];
            const int H = s_.hidden[li];
            const int G = s_.gates * H;
            const double* base = p + s_.offset[li];
            CMap W(base, G, I);
            CMap U(base + static_cast<std::size_t>(G) * I, G, H);
            double* gbase = grad + s_.offset[li];
            MMap dW(gbase, G, I);
            MMap dU(gbase + static_cast<std::size_t>(G) * I, G, H);
            MVMap db(gbase + static_cast<std::size_t>(G) * (I + H), G);
            const LayerTrace& lt = tr.layers[li];

            Sequence d_in(li > 0 ? T : 0);
            Eigen::VectorXd dh_next = Eigen::VectorXd::Zero(H);
            Eigen::VectorXd dc_next = Eigen::VectorXd::Zero(H);
            Eigen::VectorXd dz(G);
            for (std::size_t t = T; t-- > 0;) {
                Eigen::VectorXd dh = lt.mask.empty() ? d_out[t] : d_out[t].cwiseProduct(lt.mask[t]);
                dh += dh_next;
                if (spec_.kind == NetKind::RNN) {
                    dz = dh.cwiseProduct(activate_grad(spec_.activation, lt.pre[t]));
                } else {
                    const auto& g = lt.gates[t];
                    const auto i = g.segment(0, H);
                    const auto f = g.segment(H, H);
                    const auto cand = g.segment(2 * H, H);
                    const auto o = g.segment(3 * H, H);
                    const Eigen::VectorXd& c = lt.c[t];
                    const Eigen::VectorXd c_prev = t > 0 ? lt.c[t - 1] : Eigen::VectorXd::Zero(H);
                    const Eigen::VectorXd do_ = dh.cwiseProduct(activate(spec_.activation, c));
                    const Eigen::VectorXd dc =
                        dc_next + dh.cwiseProduct(o).cwiseProduct(activate_grad(spec_.activation, c));
                    dz.segment(0, H) = dc.cwiseProduct(cand).array() * i.array() * (1.0 - i.array());
                    dz.segment(H, H) = dc.cwiseProduct(c_prev).array() * f.array() * (1.0 - f.array());
                    dz.segment(2 * H, H) =
                        dc.cwiseProduct(i).cwiseProduct(activate_grad(spec_.activation, lt.pre[t]));
                    dz.segment(3 * H, H) = do_.array() * o.array() * (1.0 - o.array());
                    dc_next = dc.cwiseProduct(f);
                }
                dW.noalias() += dz * lt.x[t].transpose();
                if (t > 0) dU.noalias() += dz * lt.h[t - 1].transpose();
                db += dz;
                if (li > 0) d_in[t] = W.transpose() * dz;
                dh_next = U.transpose() * dz;
            }
            d_out = std::move(d_in);
        }
    }

private:
    const NetSpec& spec_;
    Shapes s_;
};

InputLayout layout_of(const std::vector<Eigen::MatrixXd>& sequences) {
    if (sequences.empty()) throw std::invalid_argument("no input sequences");
    InputLayout layout{static_cast<int>(sequences.front().rows()), static_cast<int>(sequences.front().cols())};
    for (const auto& s : sequences) {
        if (s.rows() != layout.time_steps || s.cols() != layout.step_features) {
            throw std::invalid_argument("input sequences disagree on layout");
        }
    }
    return layout;
}

void check_layout(const NetworkModel& m, const std::vector<Eigen::MatrixXd>& sequences) {
    for (const auto& s : sequences) {
        if (s.rows() != m.layout.time_steps || s.cols() != m.layout.step_features) {
            throw std::invalid_argument("sequence layout " + std::to_string(s.rows()) + "x" +
                                        std::to_string(s.cols()) + " does not match the model's " +
                                        std::to_string(m.layout.time_steps) + "x" +
                                        std::to_string(m.layout.step_features));
        }
    }
}

Sequence standardize(const NetworkModel& m, const Eigen::MatrixXd& s) {
    Sequence out(static_cast<std::size_t>(s.rows()));
    for (Eigen::Index t = 0; t < s.rows(); ++t) {
        out[static_cast<std::size_t>(t)] =
            ((s.row(t).transpose() - m.input_mean).array() / m.input_scale.array()).matrix();
    }
    return out;
}

}  // namespace

std::size_t parameter_count(const NetSpec& spec, const InputLayout& layout) {
    spec.validate();
    return shapes_of(spec, layout).total;
}

NetworkModel net_init(const NetSpec& spec, const InputLayout& layout, std::uint64_t seed) {
    spec.validate();
    const Shapes s = shapes_of(spec, layout);
    NetworkModel m;
    m.spec = spec;
    m.layout = layout;
    m.seed = seed;
    m.parameters = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s.total));
    m.input_mean = Eigen::VectorXd::Zero(layout.step_features);
    m.input_scale = Eigen::VectorXd::Ones(layout.step_features);

    std::mt19937_64 rng(seed);
    auto fill = [&](std::size_t offset, std::size_t count, int fan_in, int fan_out) {
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> unif(-limit, limit);
        for (std::size_t k = 0; k < count; ++k) m.parameters(static_cast<Eigen::Index>(offset + k)) = unif(rng);
    };
    for (std::size_t l = 0; l < s.hidden.size(); ++l) {
        const int I = s.in[l];
        const int H = s.hidden[l];
        const int G = s.gates * H;
        fill(s.offset[l], static_cast<std::size_t>(G) * I, I, G);
        fill(s.offset[l] + static_cast<std::size_t>(G) * I, static_cast<std::size_t>(G) * H, H, G);
        if (spec.kind == NetKind::LSTM) {
            const std::size_t b = s.offset[l] + static_cast<std::size_t>(G) * (I + H);
            for (int k = 0; k < H; ++k) m.parameters(static_cast<Eigen::Index>(b) + H + k) = 1.0;
        }
    }
    fill(s.out_offset, static_cast<std::size_t>(s.out_in), s.out_in, 1);
    return m;
}

NetworkModel net_fit(const std::vector<Eigen::MatrixXd>& sequences, const Eigen::VectorXd& y, const NetSpec& spec,
                     std::uint64_t seed) {
    spec.validate();
    const InputLayout layout = layout_of(sequences);
    const std::size_t n = sequences.size();
    if (static_cast<std::size_t>(y.size()) != n) throw std::invalid_argument("sequences and targets disagree on count");
    if (n < static_cast<std::size_t>(spec.batch_size)) {
        throw std::invalid_argument("need at least batch_size (" + std::to_string(spec.batch_size) + ") samples");
    }
    NetworkModel m = net_init(spec, layout, seed);

    if (spec.standardize_inputs) {
        const double count = static_cast<double>(n) * layout.time_steps;
        Eigen::VectorXd sum = Eigen::VectorXd::Zero(layout.step_features);
        for (const auto& s : sequences) sum += s.colwise().sum().transpose();
        m.input_mean = sum / count;
        Eigen::VectorXd sq = Eigen::VectorXd::Zero(layout.step_features);
        for (const auto& s : sequences) sq += (s.rowwise() - m.input_mean.transpose()).colwise().squaredNorm().transpose();
        m.input_scale = (sq / count).cwiseSqrt();
        for (Eigen::Index k = 0; k < m.input_scale.size(); ++k) {
            if (!(m.input_scale(k) > 1e-12)) m.input_scale(k) = 1.0;
        }
    }
    m.target_mean = y.mean();
    const double sd = std::sqrt((y.array() - m.target_mean).square().mean());
    m.target_scale = sd > 1e-12 ? sd : 1.0;

    std::vector<Sequence> inputs;
    inputs.reserve(n);
    for (const auto& s : sequences) inputs.push_back(standardize(m, s));
    const Eigen::VectorXd yn = (y.array() - m.target_mean) / m.target_scale;

    const Network net(m.spec, layout);
    const auto P = m.parameters.size();
    Eigen::VectorXd grad(P);
    Eigen::VectorXd mom = Eigen::VectorXd::Zero(P);
    Eigen::VectorXd vel = Eigen::VectorXd::Zero(P);
    std::mt19937_64 rng(mix_seed(seed, 0x6e6574));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    const AdamOptions& adam = spec.adam;
    long step = 0;
    Trace tr;
    for (int epoch = 0; epoch < spec.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_sse = 0.0;
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(spec.batch_size)) {
            const std::size_t end = std::min(n, start + static_cast<std::size_t>(spec.batch_size));
            const double B = static_cast<double>(end - start);
            grad.setZero();
            for (std::size_t k = start; k < end; ++k) {
                const std::size_t i = order[k];
                const double out = net.forward(m.parameters.data(), inputs[i], tr, &rng);
                const double r = out - yn(static_cast<Eigen::Index>(i));
                epoch_sse += r * r;
                net.backward(m.parameters.data(), tr, 2.0 * r / B, grad.data());
            }
            ++step;
            mom = adam.beta1 * mom + (1.0 - adam.beta1) * grad;
            vel = adam.beta2 * vel + (1.0 - adam.beta2) * grad.cwiseProduct(grad);
            const double c1 = 1.0 - std::pow(adam.beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(adam.beta2, static_cast<double>(step));
            m.parameters.array() -=
                adam.learning_rate * (mom.array() / c1) / ((vel.array() / c2).sqrt() + adam.epsilon);
        }
        const double loss = epoch_sse / static_cast<double>(n);
        if (!std::isfinite(loss) || !m.parameters.allFinite()) {
            throw FitError("non-finite training loss at epoch " + std::to_string(epoch));
        }
        m.loss_curve.push_back(loss);
    }
    return m;
}

Eigen::VectorXd net_predict(const NetworkModel& m, const std::vector<Eigen::MatrixXd>& sequences) {
    check_layout(m, sequences);
    const Network net(m.spec, m.layout);
    if (static_cast<std::size_t>(m.parameters.size()) != net.shapes().total) {
        throw std::invalid_argument("parameter vector does not match the network spec");
    }
    Eigen::VectorXd out(static_cast<Eigen::Index>(sequences.size()));
    Trace tr;
    for (std::size_t i = 0; i < sequences.size(); ++i) {
        const double raw = net.forward(m.parameters.data(), standardize(m, sequences[i]), tr, nullptr);
        out(static_cast<Eigen::Index>(i)) = raw * m.target_scale + m.target_mean;
    }
    return out;
}

LossGradient net_loss_gradient(const NetworkModel& m, const std::vector<Eigen::MatrixXd>& sequences,
                               const Eigen::VectorXd& y) {
    check_layout(m, sequences);
    if (sequences.empty() || static_cast<std::size_t>(y.size()) != sequences.size()) {
        throw std::invalid_argument("sequences and targets disagree on count");
    }
    const Network net(m.spec, m.layout);
    LossGradient lg;
    lg.gradient = Eigen::VectorXd::Zero(m.parameters.size());
    const double n = static_cast<double>(sequences.size());
    Trace tr;
    for (std::size_t i = 0; i < sequences.size(); ++i) {
        const double out = net.forward(m.parameters.data(), standardize(m, sequences[i]), tr, nullptr);
        const double r = out - y(static_cast<Eigen::Index>(i));
        lg.loss += r * r / n;
        net.backward(m.parameters.data(), tr, 2.0 * r / n, lg.gradient.data());
    }
    return lg;
}

double gradient_check(const NetworkModel& model, const Eigen::MatrixXd& sequence, double target, double floor) {
    const std::vector<Eigen::MatrixXd> seqs{sequence};
    const Eigen::VectorXd y = Eigen::VectorXd::Constant(1, target);
    const Eigen::VectorXd analytic = net_loss_gradient(model, seqs, y).gradient;
    NetworkModel probe = model;
    const double h = 1e-5;
    double worst = 0.0;
    for (Eigen::Index k = 0; k < probe.parameters.size(); ++k) {
        const double saved = probe.parameters(k);
        probe.parameters(k) = saved + h;
        const double up = net_loss_gradient(probe, seqs, y).loss;
        probe.parameters(k) = saved - h;
        const double down = net_loss_gradient(probe, seqs, y).loss;
        probe.parameters(k) = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double denom = std::max({std::abs(analytic(k)), std::abs(numeric), floor});
        worst = std::max(worst, std::abs(analytic(k) - numeric) / denom);
    }
    return worst;
}

namespace {

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_vec(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

nlohmann::json to_json(const NetworkModel& m) {
    const auto& s = m.spec;
    return {{"family", to_string(s.kind)},
            {"spec",
             {{"layer_sizes", s.layer_sizes},
              {"dropout", s.dropout},
              {"activation", to_string(s.activation)},
              {"epochs", s.epochs},
              {"batch_size", s.batch_size},
              {"standardize_inputs", s.standardize_inputs},
              {"adam",
               {{"learning_rate", s.adam.learning_rate},
                {"beta1", s.adam.beta1},
                {"beta2", s.adam.beta2},
                {"epsilon", s.adam.epsilon}}}}},
            {"layout", {{"time_steps", m.layout.time_steps}, {"step_features", m.layout.step_features}}},
            {"parameters", to_vec(m.parameters)},
            {"input_mean", to_vec(m.input_mean)},
            {"input_scale", to_vec(m.input_scale)},
            {"target_mean", m.target_mean},
            {"target_scale", m.target_scale},
            {"seed", m.seed}};
}

NetworkModel network_model_from_json(const nlohmann::json& j) {
    NetworkModel m;
    m.spec.kind = net_kind_from_string(j.at("family").get<std::string>());
    const auto& s = j.at("spec");
    m.spec.layer_sizes = s.at("layer_sizes").get<std::vector<int>>();
    m.spec.dropout = s.at("dropout");
    m.spec.activation = activation_from_string(s.at("activation").get<std::string>());
    m.spec.epochs = s.at("epochs");
    m.spec.batch_size = s.at("batch_size");
    m.spec.standardize_inputs = s.value("standardize_inputs", true);
    const auto& a = s.at("adam");
    m.spec.adam = {a.at("learning_rate"), a.at("beta1"), a.at("beta2"), a.at("epsilon")};
    m.spec.validate();
    m.layout = {j.at("layout").at("time_steps"), j.at("layout").at("step_features")};
    m.parameters = from_vec(j.at("parameters").get<std::vector<double>>());
    m.input_mean = from_vec(j.at("input_mean").get<std::vector<double>>());
    m.input_scale = from_vec(j.at("input_scale").get<std::vector<double>>());
    m.target_mean = j.at("target_mean");
    m.target_scale = j.at("target_scale");
    m.seed = j.value("seed", std::uint64_t{0});
    if (static_cast<std::size_t>(m.parameters.size()) != parameter_count(m.spec, m.layout)) {
        throw std::invalid_argument("parameter vector length does not match the network spec");
    }
    return m;
}

}  // namespace porkcast
