#include "faultlab/zoo.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>

#include <json.hpp>

#include "faultlab/error.hpp"
#include "faultlab/idx.hpp"

namespace faultlab::zoo {

namespace {

constexpr char kBlobMagic[8] = {'F', 'L', 'A', 'B', 'W', 'B', '0', '1'};
constexpr std::uint32_t kBlobVersion = 1;

std::uint32_t crc_table_entry(std::uint32_t i) {
    std::uint32_t c = i;
    for (int k = 0; k < 8; ++k)
        c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
    return c;
}

const std::uint32_t* crc_table() {
    static std::uint32_t table[256];
    static bool init = [] {
        for (std::uint32_t i = 0; i < 256; ++i) table[i] = crc_table_entry(i);
        return true;
    }();
    (void)init;
    return table;
}

void put_u32(std::vector<std::uint8_t>& v, std::uint32_t x) {
    v.push_back(static_cast<std::uint8_t>(x));
    v.push_back(static_cast<std::uint8_t>(x >> 8));
    v.push_back(static_cast<std::uint8_t>(x >> 16));
    v.push_back(static_cast<std::uint8_t>(x >> 24));
}

void put_f64(std::vector<std::uint8_t>& v, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    for (int i = 0; i < 8; ++i)
        v.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

struct Cursor {
    const std::vector<std::uint8_t>& bytes;
    std::size_t pos = 0;
    const std::string& name;

    void need(std::size_t n) const {
        if (pos + n > bytes.size())
            throw FormatError(name + ": weight blob truncated at byte " +
                              std::to_string(pos));
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t x = bytes[pos] | (std::uint32_t(bytes[pos + 1]) << 8) |
                          (std::uint32_t(bytes[pos + 2]) << 16) |
                          (std::uint32_t(bytes[pos + 3]) << 24);
        pos += 4;
        return x;
    }
    double f64() {
        need(8);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i)
            bits |= std::uint64_t(bytes[pos + i]) << (8 * i);
        pos += 8;
        double d;
        std::memcpy(&d, &bits, 8);
        return d;
    }
};

void put_tensor(std::vector<std::uint8_t>& out, const Tensor& t) {
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape()) put_u32(out, static_cast<std::uint32_t>(e));
    for (std::size_t i = 0; i < t.size(); ++i) put_f64(out, t[i]);
}

Tensor get_tensor(Cursor& c) {
    std::uint32_t rank = c.u32();
    if (rank > 8) throw FormatError(c.name + ": implausible tensor rank " +
                                    std::to_string(rank));
    std::vector<std::size_t> shape(rank);
    std::size_t n = 1;
    for (auto& e : shape) {
        e = c.u32();
        n *= e;
    }
    std::vector<double> data(n);
    for (double& d : data) d = c.f64();
    return Tensor(std::move(shape), std::move(data));
}

} // namespace

std::uint32_t crc32(const std::uint8_t* data, std::size_t len) {
    const std::uint32_t* table = crc_table();
    std::uint32_t c = 0xFFFFFFFFu;
    for (std::size_t i = 0; i < len; ++i)
        c = table[(c ^ data[i]) & 0xFF] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

std::string crc32_hex(std::uint32_t v) {
    char buf[9];
    std::snprintf(buf, sizeof(buf), "%08x", v);
    return buf;
}

void atomic_write(const std::filesystem::path& path, const std::string& bytes) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot write " + tmp.string());
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!f) throw IoError("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::vector<std::uint8_t> encode_weights(const TrainedModel& m) {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), kBlobMagic, kBlobMagic + 8);
    put_u32(out, kBlobVersion);
    put_u32(out, static_cast<std::uint32_t>(m.weights.size()));
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
        put_tensor(out, m.weights[l]);
        put_tensor(out, m.biases[l]);
    }
    return out;
}

void write_weights_blob(const std::filesystem::path& path,
                        const TrainedModel& m) {
    auto bytes = encode_weights(m);
    atomic_write(path,
                 std::string(reinterpret_cast<const char*>(bytes.data()),
                             bytes.size()));
}

TrainedModel read_weights_blob(const std::filesystem::path& path,
                               const ModelSpec& spec) {
    return decode_weights(idx::read_file_bytes(path), spec, path.string());
}

TrainedModel decode_weights(const std::vector<std::uint8_t>& bytes,
                            const ModelSpec& spec, const std::string& name) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kBlobMagic, 8) != 0)
        throw FormatError(name + ": not a weight blob (bad magic)");
    Cursor c{bytes, 8, name};
    std::uint32_t version = c.u32();
    if (version != kBlobVersion)
        throw FormatError(name + ": unsupported blob version " +
                          std::to_string(version));
    std::uint32_t layers = c.u32();
    auto plan = plan_layers(spec);
    if (layers != plan.size())
        throw FormatError(name + ": blob has " + std::to_string(layers) +
                          " layers, spec " + spec.name() + " expects " +
                          std::to_string(plan.size()));
    TrainedModel m;
    m.spec = spec;
    for (std::uint32_t l = 0; l < layers; ++l) {
        m.weights.push_back(get_tensor(c));
        m.biases.push_back(get_tensor(c));
        const LayerPlan& p = plan[l];
        if (m.weights[l].size() != p.weight_count() ||
            m.biases[l].size() != p.bias_count())
            throw FormatError(name + ": layer " + std::to_string(l) +
                              " sizes do not match spec " + spec.name());
    }
    if (c.pos != bytes.size())
        throw FormatError(name + ": trailing bytes after weight payload");
    return m;
}

namespace {

using nlohmann::ordered_json;

ordered_json spec_to_json(const ModelSpec& s) {
    ordered_json j;
    j["family"] = s.kind == ModelKind::mlp ? "mlp" : "cnn";
    j["L"] = s.layers;
    if (s.kind == ModelKind::mlp) {
        j["N"] = s.neurons;
    } else {
        j["C"] = s.kernel;
        j["P"] = s.pool_size;
        j["F"] = s.feature_maps;
        j["pool"] = pooling_name(s.pooling);
        j["dense_width"] = s.dense_width;
    }
    j["num_classes"] = s.num_classes;
    j["clip"] = s.clip;
    return j;
}

ModelSpec spec_from_json(const ordered_json& j) {
    ModelSpec s;
    const std::string family = j.at("family");
    if (family == "mlp") {
        s = ModelSpec::mlp(j.at("L"), j.at("N"));
    } else if (family == "cnn") {
        s = ModelSpec::cnn(j.at("L"), j.at("C"), j.at("P"), j.at("F"),
                           pooling_from_name(j.at("pool")));
        s.dense_width = j.value("dense_width", 200);
    } else {
        throw ParseError("unknown model family '" + family + "'");
    }
    s.num_classes = j.value("num_classes", 10);
    s.clip = j.value("clip", 1.0);
    return s;
}

} // namespace

void save_manifest(const std::filesystem::path& path, const ZooManifest& m) {
    ordered_json j;
    j["format"] = "faultlab-zoo";
    j["version"] = 1;
    j["base_seed"] = m.base_seed;
    j["models"] = ordered_json::array();
    for (const ZooEntry& e : m.entries) {
        ordered_json je;
        je["model_id"] = e.model_id;
        je["spec"] = spec_to_json(e.spec);
        je["seed"] = e.seed;
        je["n_params"] = e.n_params;
        je["clean_test_error"] = e.clean_test_error;
        je["epoch_loss_first"] = e.epoch_loss_first;
        je["epoch_loss_last"] = e.epoch_loss_last;
        je["blob"] = e.blob_file;
        je["crc32"] = e.crc32_hex;
        j["models"].push_back(je);
    }
    atomic_write(path, j.dump(2) + "\n");
}

ZooManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open manifest " + path.string());
    ordered_json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        throw ParseError("manifest " + path.string() + ": " + e.what());
    }
    if (j.value("format", "") != "faultlab-zoo")
        throw ParseError("manifest " + path.string() +
                         ": missing faultlab-zoo format marker");
    ZooManifest m;
    m.base_seed = j.at("base_seed");
    for (const auto& je : j.at("models")) {
        ZooEntry e;
        e.model_id = je.at("model_id");
        e.spec = spec_from_json(je.at("spec"));
        e.seed = je.at("seed");
        e.n_params = je.at("n_params");
        e.clean_test_error = je.at("clean_test_error");
        e.epoch_loss_first = je.value("epoch_loss_first", 0.0);
        e.epoch_loss_last = je.value("epoch_loss_last", 0.0);
        e.blob_file = je.at("blob");
        e.crc32_hex = je.at("crc32");
        m.entries.push_back(e);
    }
    return m;
}

GridConfig GridConfig::load(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open grid config " + path.string());
    ordered_json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        throw ParseError("grid config " + path.string() + ": " + e.what());
    }
    GridConfig g;
    if (j.contains("mlp")) {
        g.mlp_L = j["mlp"].value("L", std::vector<int>{});
        g.mlp_N = j["mlp"].value("N", std::vector<int>{});
    }
    if (j.contains("cnn")) {
        g.cnn_L = j["cnn"].value("L", std::vector<int>{});
        g.cnn_C = j["cnn"].value("C", std::vector<int>{});
        g.cnn_P = j["cnn"].value("P", std::vector<int>{});
        g.cnn_F = j["cnn"].value("F", std::vector<int>{});
        for (const auto& s : j["cnn"].value("pool", std::vector<std::string>{}))
            g.cnn_pool.push_back(pooling_from_name(s));
    }
    g.seeds = j.value("seeds", std::vector<std::uint64_t>{0});
    g.subsample_train = j.value("subsample_train", std::size_t{0});
    if (j.contains("train")) {
        const auto& t = j["train"];
        g.train.batch_size = t.value("batch_size", 128);
        g.train.epochs = t.value("epochs", 15);
        g.train.dropout_conv = t.value("dropout_conv", 0.25);
        g.train.dropout_dense = t.value("dropout_dense", 0.5);
        g.train.adadelta_rho = t.value("adadelta_rho", 0.95);
        g.train.adadelta_eps = t.value("adadelta_eps", 1e-6);
    }
    g.train.validate();
    return g;
}

std::string model_id_for(const ModelSpec& spec, std::uint64_t seed) {
    return spec.name() + "-s" + std::to_string(seed);
}

std::vector<std::pair<ModelSpec, std::uint64_t>> GridConfig::expand() const {
    std::vector<ModelSpec> specs;
    for (int L : mlp_L)
        for (int N : mlp_N) specs.push_back(ModelSpec::mlp(L, N));
    // Family spans may cross combinations whose spatial extent collapses
    // (deep stacks of large kernels with pooling); those are dropped so a
    // whole-family grid file stays usable.
    for (int L : cnn_L)
        for (int C : cnn_C)
            for (int P : cnn_P)
                for (int F : cnn_F)
                    for (Pooling pool : cnn_pool) {
                        ModelSpec s = ModelSpec::cnn(L, C, P, F, pool);
                        try {
                            s.validate();
                        } catch (const DomainError&) {
                            continue;
                        }
                        specs.push_back(s);
                    }
    std::vector<std::pair<ModelSpec, std::uint64_t>> out;
    std::set<std::string> seen;
    for (const ModelSpec& s : specs) {
        s.validate();
        for (std::uint64_t seed : seeds) {
            std::string id = model_id_for(s, seed);
            if (!seen.insert(id).second)
                throw DomainError("duplicate grid key " + id);
            out.emplace_back(s, seed);
        }
    }
    if (out.empty()) throw DomainError("grid expands to no models");
    return out;
}

} // namespace faultlab::zoo
