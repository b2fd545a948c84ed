#pragma once

// SCDCKPT1 checkpoints: "SCDCKPT1\n", ASCII key=value config lines, a
// "params=N" line followed by N "name d0 d1 ..." lines and "end\n", then the
// parameters as raw little-endian float32 in header order. 32-bit states
// round-trip bit-identically.

#include <scd/model.hpp>

#include <cstring>
#include <fstream>
#include <sstream>

namespace scd {

namespace detail {

inline std::string join_ints(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(v[i]);
    }
    return s;
}

inline std::vector<int> split_ints(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
    return out;
}

inline std::string ckpt_line(std::istream& in, const std::string& path) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("load_checkpoint: truncated header in " + path);
    return line;
}

}  // namespace detail

template <typename T>
void save_checkpoint(const ModelState<T>& state, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
    const auto& c = state.config;
    out << "SCDCKPT1\n"
        << "fusion=" << fusion_name(c.fusion) << "\n"
        << "gated=" << (c.gated ? 1 : 0) << "\n"
        << "encoder_filters=" << detail::join_ints(c.encoder_filters) << "\n"
        << "decoder_filters=" << detail::join_ints(c.decoder_filters) << "\n"
        << "kernel=" << c.kernel << "\n"
        << "input_channels=" << c.input_channels << "\n"
        << "input_h=" << c.input_h << "\n"
        << "input_w=" << c.input_w << "\n"
        << "params=" << state.params.size() << "\n";
    for (const auto& [name, t] : state.params) {
        out << name;
        for (int d : t->shape) out << ' ' << d;
        out << "\n";
    }
    out << "end\n";
    static_assert(std::endian::native == std::endian::little, "payload is little-endian");
    std::vector<float> payload;
    for (const auto& [name, t] : state.params) {
        payload.resize(t->numel());
        for (std::size_t i = 0; i < t->numel(); ++i) payload[i] = float(t->data[i]);
        out.write(reinterpret_cast<const char*>(payload.data()),
                  std::streamsize(payload.size() * sizeof(float)));
    }
    if (!out) throw std::runtime_error("save_checkpoint: write failed: " + path);
}

template <typename T>
ModelState<T> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
    if (detail::ckpt_line(in, path) != "SCDCKPT1")
        throw std::runtime_error("load_checkpoint: bad magic in " + path);

    ModelConfig cfg;
    std::size_t n_params = 0;
    for (;;) {
        const std::string line = detail::ckpt_line(in, path);
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("load_checkpoint: malformed header line '" + line + "' in " + path);
        const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
        if (key == "fusion")
            cfg.fusion = fusion_from_name(value);
        else if (key == "gated")
            cfg.gated = value == "1";
        else if (key == "encoder_filters")
            cfg.encoder_filters = detail::split_ints(value);
        else if (key == "decoder_filters")
            cfg.decoder_filters = detail::split_ints(value);
        else if (key == "kernel")
            cfg.kernel = std::stoi(value);
        else if (key == "input_channels")
            cfg.input_channels = std::stoi(value);
        else if (key == "input_h")
            cfg.input_h = std::stoi(value);
        else if (key == "input_w")
            cfg.input_w = std::stoi(value);
        else if (key == "params") {
            n_params = std::stoul(value);
            break;
        } else
            throw std::runtime_error("load_checkpoint: unknown header field '" + key + "' in " + path);
    }

    const auto expected_spec = parameter_spec(cfg);
    if (expected_spec.size() != n_params)
        throw std::runtime_error("load_checkpoint: header lists " + std::to_string(n_params) +
                                 " parameters but the config implies " + std::to_string(expected_spec.size()));

    ModelState<T> state;
    state.config = cfg;
    for (std::size_t i = 0; i < n_params; ++i) {
        std::stringstream ss(detail::ckpt_line(in, path));
        std::string name;
        ss >> name;
        std::vector<int> shape;
        int d;
        while (ss >> d) shape.push_back(d);
        if (name != expected_spec[i].first || shape != expected_spec[i].second)
            throw std::runtime_error("load_checkpoint: parameter '" + name + "' " + shape_str(shape) +
                                     " does not match expected '" + expected_spec[i].first + "' " +
                                     shape_str(expected_spec[i].second));
        state.params.emplace_back(name, Tensor<T>::create(shape, true));
    }
    if (detail::ckpt_line(in, path) != "end")
        throw std::runtime_error("load_checkpoint: missing end marker in " + path);

    std::vector<float> payload;
    for (auto& [name, t] : state.params) {
        payload.resize(t->numel());
        in.read(reinterpret_cast<char*>(payload.data()), std::streamsize(payload.size() * sizeof(float)));
        if (std::size_t(in.gcount()) != payload.size() * sizeof(float))
            throw std::runtime_error("load_checkpoint: truncated payload at '" + name + "' in " + path);
        for (std::size_t i = 0; i < t->numel(); ++i) t->data[i] = T(payload[i]);
    }
    char extra;
    if (in.read(&extra, 1))
        throw std::runtime_error("load_checkpoint: trailing bytes after payload in " + path);
    return state;
}

/// Load with a configuration the caller insists on; mismatches are errors
/// that name the offending field.
template <typename T>
ModelState<T> load_checkpoint(const std::string& path, const ModelConfig& expected) {
    auto state = load_checkpoint<T>(path);
    const auto& c = state.config;
    auto fail = [&](const std::string& field, const std::string& got, const std::string& want) {
        throw std::runtime_error("load_checkpoint: checkpoint field '" + field + "' is " + got +
                                 " but the run is configured for " + want);
    };
    if (c.fusion != expected.fusion) fail("fusion", fusion_name(c.fusion), fusion_name(expected.fusion));
    if (c.gated != expected.gated) fail("gated", std::to_string(c.gated), std::to_string(expected.gated));
    if (c.encoder_filters != expected.encoder_filters)
        fail("encoder_filters", detail::join_ints(c.encoder_filters), detail::join_ints(expected.encoder_filters));
    if (c.decoder_filters != expected.decoder_filters)
        fail("decoder_filters", detail::join_ints(c.decoder_filters), detail::join_ints(expected.decoder_filters));
    if (c.kernel != expected.kernel) fail("kernel", std::to_string(c.kernel), std::to_string(expected.kernel));
    if (c.input_channels != expected.input_channels)
        fail("input_channels", std::to_string(c.input_channels), std::to_string(expected.input_channels));
    if (c.input_h != expected.input_h) fail("input_h", std::to_string(c.input_h), std::to_string(expected.input_h));
    if (c.input_w != expected.input_w) fail("input_w", std::to_string(c.input_w), std::to_string(expected.input_w));
    return state;
}

}  // namespace scd
