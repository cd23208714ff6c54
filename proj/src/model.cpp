#include <cmath>
#include <cstdio>

#include "faultlab/error.hpp"
#include "faultlab/model.hpp"
#include "faultlab/rng.hpp"

namespace faultlab {

ModelSpec ModelSpec::mlp(int L, int N) {
    ModelSpec s;
    s.kind = ModelKind::mlp;
    s.layers = L;
    s.neurons = N;
    return s;
}

ModelSpec ModelSpec::cnn(int L, int C, int P, int F, Pooling pool) {
    ModelSpec s;
    s.kind = ModelKind::cnn;
    s.layers = L;
    s.kernel = C;
    s.pool_size = P;
    s.feature_maps = F;
    s.pooling = pool;
    return s;
}

void ModelSpec::validate(std::size_t in_h, std::size_t in_w) const {
    if (layers < 1) throw DomainError("model needs at least one layer");
    if (num_classes < 2) throw DomainError("num_classes must be >= 2");
    if (!(clip > 0.0)) throw DomainError("clip must be positive");
    if (kind == ModelKind::mlp) {
        if (neurons < 1) throw DomainError("MLP neurons per layer must be >= 1");
        return;
    }
    if (kernel < 1) throw DomainError("conv kernel side must be >= 1");
    if (pool_size < 1) throw DomainError("pool side must be >= 1");
    if (feature_maps < 1) throw DomainError("feature maps must be >= 1");
    if (dense_width < 1) throw DomainError("dense width must be >= 1");
    // Spatial extent must survive all L conv+pool stages.
    std::size_t h = in_h, w = in_w;
    std::size_t p = pooling == Pooling::max ? static_cast<std::size_t>(pool_size) : 1;
    for (int l = 0; l < layers; ++l) {
        if (h < static_cast<std::size_t>(kernel) || w < static_cast<std::size_t>(kernel))
            throw DomainError("conv layer " + std::to_string(l) + " of " + name() +
                              ": kernel " + std::to_string(kernel) +
                              " exceeds input extent " + std::to_string(h) + "x" +
                              std::to_string(w));
        h = h - kernel + 1;
        w = w - kernel + 1;
        if (p > 1) {
            h /= p;
            w /= p;
            if (h < 1 || w < 1)
                throw DomainError("pooling collapses layer " + std::to_string(l) +
                                  " of " + name() + " below 1x1");
        }
    }
}

std::string ModelSpec::name() const {
    char buf[96];
    if (kind == ModelKind::mlp) {
        std::snprintf(buf, sizeof(buf), "mlp-%d-%d", layers, neurons);
    } else {
        std::snprintf(buf, sizeof(buf), "cnn-%d-%d-%d-%d-%s", layers, kernel,
                      pool_size, feature_maps, pooling_name(pooling));
    }
    std::string s(buf);
    if (kind == ModelKind::cnn && dense_width != 200)
        s += "-d" + std::to_string(dense_width);
    return s;
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = s.find(sep, start);
        out.push_back(s.substr(start, pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

int parse_int(const std::string& s, const std::string& whole) {
    try {
        std::size_t used = 0;
        int v = std::stoi(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw DomainError("bad model name '" + whole + "': field '" + s +
                          "' is not an integer");
    }
}

} // namespace

ModelSpec ModelSpec::parse(const std::string& name) {
    auto parts = split(name, '-');
    if (parts.size() >= 3 && parts[0] == "mlp") {
        if (parts.size() != 3) throw DomainError("bad model name '" + name + "'");
        return mlp(parse_int(parts[1], name), parse_int(parts[2], name));
    }
    if (parts.size() >= 6 && parts[0] == "cnn") {
        ModelSpec s = cnn(parse_int(parts[1], name), parse_int(parts[2], name),
                          parse_int(parts[3], name), parse_int(parts[4], name),
                          pooling_from_name(parts[5]));
        if (parts.size() == 7 && parts[6].size() > 1 && parts[6][0] == 'd') {
            s.dense_width = parse_int(parts[6].substr(1), name);
            return s;
        }
        if (parts.size() == 6) return s;
    }
    throw DomainError("bad model name '" + name + "'");
}

const char* pooling_name(Pooling p) {
    return p == Pooling::max ? "max" : "none";
}

Pooling pooling_from_name(const std::string& s) {
    if (s == "max") return Pooling::max;
    if (s == "none") return Pooling::none;
    throw DomainError("unknown pooling kind '" + s + "'");
}

std::size_t LayerPlan::weight_count() const {
    if (type == Type::dense) return in * out;
    return ksize * ksize * in_c * maps;
}

std::size_t LayerPlan::bias_count() const {
    return type == Type::dense ? out : maps;
}

std::size_t LayerPlan::output_size() const {
    if (type == Type::dense) return out;
    return pooled_h * pooled_w * maps;
}

std::vector<LayerPlan> plan_layers(const ModelSpec& spec, std::size_t in_h,
                                   std::size_t in_w) {
    spec.validate(in_h, in_w);
    std::vector<LayerPlan> plan;
    if (spec.kind == ModelKind::mlp) {
        std::size_t in = in_h * in_w;
        for (int l = 0; l < spec.layers; ++l) {
            LayerPlan p;
            p.type = LayerPlan::Type::dense;
            p.in = in;
            p.out = static_cast<std::size_t>(spec.neurons);
            plan.push_back(p);
            in = p.out;
        }
        LayerPlan top;
        top.type = LayerPlan::Type::dense;
        top.in = in;
        top.out = static_cast<std::size_t>(spec.num_classes);
        plan.push_back(top);
        return plan;
    }
    std::size_t h = in_h, w = in_w, c = 1;
    std::size_t pool = spec.pooling == Pooling::max
                           ? static_cast<std::size_t>(spec.pool_size)
                           : 1;
    for (int l = 0; l < spec.layers; ++l) {
        LayerPlan p;
        p.type = LayerPlan::Type::conv;
        p.in_h = h;
        p.in_w = w;
        p.in_c = c;
        p.ksize = static_cast<std::size_t>(spec.kernel);
        p.maps = static_cast<std::size_t>(spec.feature_maps);
        p.out_h = h - spec.kernel + 1;
        p.out_w = w - spec.kernel + 1;
        p.pool_size = pool;
        p.pooled_h = pool > 1 ? p.out_h / pool : p.out_h;
        p.pooled_w = pool > 1 ? p.out_w / pool : p.out_w;
        plan.push_back(p);
        h = p.pooled_h;
        w = p.pooled_w;
        c = p.maps;
    }
    LayerPlan mid;
    mid.type = LayerPlan::Type::dense;
    mid.in = h * w * c;
    mid.out = static_cast<std::size_t>(spec.dense_width);
    plan.push_back(mid);
    LayerPlan top;
    top.type = LayerPlan::Type::dense;
    top.in = mid.out;
    top.out = static_cast<std::size_t>(spec.num_classes);
    plan.push_back(top);
    return plan;
}

std::size_t count_params(const ModelSpec& spec) {
    std::size_t total = 0;
    for (const LayerPlan& p : plan_layers(spec))
        total += p.weight_count() + p.bias_count();
    return total;
}

std::size_t TrainedModel::n_params() const {
    std::size_t total = 0;
    for (const Tensor& t : weights) total += t.size();
    for (const Tensor& t : biases) total += t.size();
    return total;
}

std::size_t count_params(const TrainedModel& m) { return m.n_params(); }

double glorot_limit(std::size_t fan_in, std::size_t fan_out) {
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

Tensor glorot_uniform(std::vector<std::size_t> shape, std::size_t fan_in,
                      std::size_t fan_out, rng::Substream s) {
    double limit = glorot_limit(fan_in, fan_out);
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i)
        t[i] = (2.0 * s.unit_at(i) - 1.0) * limit;
    return t;
}

TrainedModel init_model(const ModelSpec& spec, std::uint64_t seed) {
    TrainedModel m;
    m.spec = spec;
    auto plan = plan_layers(spec);
    std::size_t k = static_cast<std::size_t>(spec.kernel);
    for (std::size_t l = 0; l < plan.size(); ++l) {
        const LayerPlan& p = plan[l];
        auto stream = rng::substream(seed, rng::Domain::glorot_init,
                                     static_cast<std::uint32_t>(l), 0);
        if (p.type == LayerPlan::Type::dense) {
            m.weights.push_back(glorot_uniform({p.out, p.in}, p.in, p.out, stream));
            m.biases.push_back(Tensor({p.out}));
        } else {
            std::size_t fan_in = k * k * p.in_c;
            std::size_t fan_out = k * k * p.maps;
            m.weights.push_back(
                glorot_uniform({k, k, p.in_c, p.maps}, fan_in, fan_out, stream));
            m.biases.push_back(Tensor({p.maps}));
        }
    }
    return m;
}

} // namespace faultlab
