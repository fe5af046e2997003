#include "dlmac/errors.hpp"
#include "dlmac/neuralkit.hpp"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace dlmac {

namespace {

constexpr std::string_view kMagic{"DLMACNN\x01", 8};
constexpr std::uint32_t kFormatVersion = 1;

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(std::string_view in, std::size_t pos) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(in[pos + static_cast<std::size_t>(i)]);
    return v;
}

std::string_view kind_name(LayerKind k) { return k == LayerKind::lstm ? "lstm" : "dense"; }
std::string_view activation_name(Activation a) { return a == Activation::relu ? "relu" : "none"; }

nlohmann::json describe(const NeuralModel& model) {
    const auto& arch = model.architecture();
    const auto& info = model.info();
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : arch.layers)
        layers.push_back({{"kind", kind_name(l.kind)},
                          {"in", l.in},
                          {"out", l.out},
                          {"activation", activation_name(l.activation)}});
    return {{"format", kFormatVersion},
            {"task", to_string(info.task)},
            {"channels", info.channels},
            {"txop_slots", info.txop_slots},
            {"k1", info.k1},
            {"k2", info.k2},
            {"p_r_dbm", info.p_r_dbm},
            {"norm_lo", info.normalization.lo},
            {"norm_hi", info.normalization.hi},
            {"rssi_min_dbm", info.rssi_min_dbm},
            {"rssi_max_dbm", info.rssi_max_dbm},
            {"seq_len", arch.seq_len},
            {"step_dim", arch.step_dim},
            {"layers", layers},
            {"n_params", arch.n_params()}};
}

template <class T>
T field(const nlohmann::json& j, const char* key) {
    if (!j.contains(key)) throw SchemaError(std::string("model descriptor lacks '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw SchemaError(std::string("model descriptor field '") + key + "' has the wrong type");
    }
}

NeuralModel from_descriptor(const nlohmann::json& j) {
    if (!j.is_object()) throw SchemaError("model descriptor is not an object");
    if (field<std::uint32_t>(j, "format") != kFormatVersion) throw SchemaError("unsupported model format version");
    Architecture arch;
    arch.seq_len = field<std::size_t>(j, "seq_len");
    arch.step_dim = field<std::size_t>(j, "step_dim");
    const auto layers = field<nlohmann::json>(j, "layers");
    if (!layers.is_array()) throw SchemaError("'layers' must be an array");
    for (const auto& l : layers) {
        LayerSpec s;
        const auto kind = field<std::string>(l, "kind");
        if (kind == "dense") s.kind = LayerKind::dense;
        else if (kind == "lstm") s.kind = LayerKind::lstm;
        else throw SchemaError("unknown layer kind '" + kind + "'");
        const auto act = field<std::string>(l, "activation");
        if (act == "none") s.activation = Activation::none;
        else if (act == "relu") s.activation = Activation::relu;
        else throw SchemaError("unknown activation '" + act + "'");
        s.in = field<std::size_t>(l, "in");
        s.out = field<std::size_t>(l, "out");
        arch.layers.push_back(s);
    }
    try {
        arch.validate();
    } catch (const Error& e) {
        throw SchemaError(std::string("invalid architecture: ") + e.what());
    }
    if (field<std::size_t>(j, "n_params") != arch.n_params()) throw SchemaError("parameter count mismatch");

    ModelInfo info;
    info.task = task_from_string(field<std::string>(j, "task"));
    info.channels = field<std::vector<int>>(j, "channels");
    info.txop_slots = field<std::size_t>(j, "txop_slots");
    info.k1 = field<std::size_t>(j, "k1");
    info.k2 = field<std::size_t>(j, "k2");
    info.p_r_dbm = field<double>(j, "p_r_dbm");
    info.normalization = {field<double>(j, "norm_lo"), field<double>(j, "norm_hi")};
    info.rssi_min_dbm = field<double>(j, "rssi_min_dbm");
    info.rssi_max_dbm = field<double>(j, "rssi_max_dbm");
    if (!info.normalization.valid()) throw SchemaError("invalid normalization range");
    if (info.channels.empty()) throw SchemaError("model has no channels");
    const std::size_t want_classes =
        info.task == TaskKind::jcara ? static_cast<std::size_t>(kMcsClasses) : info.channels.size();
    if (arch.n_classes() != want_classes) throw SchemaError("output width does not match the task");
    const std::size_t want_input = info.task == TaskKind::jcara ? info.txop_slots * info.k1
                                                                : info.k2 * info.channels.size();
    if (arch.input_dim() != want_input) throw SchemaError("input width does not match the task");
    return NeuralModel(std::move(arch), std::move(info));
}

} // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string serialize_model(const NeuralModel& model) {
    const std::string header = describe(model).dump();
    std::string out(kMagic);
    put_u64(out, header.size());
    out += header;
    for (double p : model.params()) put_u64(out, std::bit_cast<std::uint64_t>(p));
    put_u64(out, fnv1a64(out));
    return out;
}

NeuralModel deserialize_model(std::string_view bytes, std::optional<TaskKind> expected_task) {
    if (bytes.size() < kMagic.size() || bytes.substr(0, kMagic.size()) != kMagic) {
        // A prefix of the magic is a truncated file rather than a foreign one.
        if (bytes.size() < kMagic.size() && kMagic.substr(0, bytes.size()) == bytes)
            throw ChecksumError("model file truncated");
        throw SchemaError("not a model file (bad magic)");
    }
    std::size_t pos = kMagic.size();
    if (bytes.size() < pos + 8 + 8) throw ChecksumError("model file truncated");
    const std::uint64_t header_len = get_u64(bytes, pos);
    pos += 8;
    if (header_len > bytes.size() - pos - 8) throw ChecksumError("model file truncated");

    const auto body = bytes.substr(0, bytes.size() - 8);
    const std::uint64_t stored = get_u64(bytes, bytes.size() - 8);

    nlohmann::json desc;
    try {
        desc = nlohmann::json::parse(bytes.substr(pos, header_len));
    } catch (const nlohmann::json::exception&) {
        if (fnv1a64(body) != stored) throw ChecksumError("model checksum mismatch");
        throw SchemaError("model descriptor is not valid JSON");
    }
    pos += header_len;
    NeuralModel model = from_descriptor(desc);
    const std::size_t n = model.params().size();
    const std::size_t weight_bytes = body.size() - pos;
    if (weight_bytes != n * 8) {
        if (weight_bytes < n * 8) throw ChecksumError("model file truncated");
        if (fnv1a64(body) != stored) throw ChecksumError("model checksum mismatch");
        throw SchemaError("unexpected trailing bytes in model file");
    }
    if (fnv1a64(body) != stored) throw ChecksumError("model checksum mismatch");
    auto params = model.params();
    for (std::size_t k = 0; k < n; ++k) {
        params[k] = std::bit_cast<double>(get_u64(bytes, pos + 8 * k));
        if (!std::isfinite(params[k])) throw SchemaError("model contains non-finite weights");
    }
    if (expected_task && *expected_task != model.info().task)
        throw SchemaError("model was trained for task '" + std::string(to_string(model.info().task)) +
                          "', expected '" + std::string(to_string(*expected_task)) + "'");
    return model;
}

void save_model(const NeuralModel& model, const std::filesystem::path& path) {
    const auto bytes = serialize_model(model);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + path.string());
}

NeuralModel load_model(const std::filesystem::path& path, std::optional<TaskKind> expected_task) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open model " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return deserialize_model(ss.str(), expected_task);
}

} // namespace dlmac
