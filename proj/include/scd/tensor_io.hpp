#pragma once

#include <scd/tensor.hpp>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace scd {

// "SCDT1" raw tensor files: 8 magic bytes, an ASCII "rank d0 d1 ... dn\n"
// line, then row-major little-endian float32 payload.

inline constexpr char kTensorMagic[8] = {'S', 'C', 'D', 'T', '1', '\0', '\0', '\0'};

namespace detail {

inline void write_f32_le(std::ostream& os, const std::vector<float>& values) {
    static_assert(sizeof(float) == 4);
    // Assumes a little-endian host, which is all this project targets.
    os.write(reinterpret_cast<const char*>(values.data()),
             static_cast<std::streamsize>(values.size() * sizeof(float)));
}

}  // namespace detail

template <typename T>
void write_tensor(const std::string& path, const Tensor<T>& t) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("write_tensor: cannot open " + path);
    os.write(kTensorMagic, sizeof(kTensorMagic));
    os << t.rank();
    for (int d : t.shape) os << ' ' << d;
    os << '\n';
    std::vector<float> payload(t.data.size());
    for (std::size_t i = 0; i < payload.size(); ++i) payload[i] = static_cast<float>(t.data[i]);
    detail::write_f32_le(os, payload);
    if (!os) throw std::runtime_error("write_tensor: write failed for " + path);
}

template <typename T>
TensorPtr<T> read_tensor(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("read_tensor: cannot open " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kTensorMagic, sizeof(magic)) != 0)
        throw std::runtime_error("read_tensor: bad magic in " + path);
    std::string header;
    if (!std::getline(is, header)) throw std::runtime_error("read_tensor: missing shape line in " + path);
    std::istringstream hs(header);
    int rank = -1;
    hs >> rank;
    if (rank < 0 || rank > 8) throw std::runtime_error("read_tensor: bad rank in " + path);
    std::vector<int> shape(rank);
    for (int i = 0; i < rank; ++i) {
        if (!(hs >> shape[i]) || shape[i] <= 0) throw std::runtime_error("read_tensor: bad dims in " + path);
    }
    const std::size_t n = rank == 0 ? 1 : shape_numel(shape);
    std::vector<float> payload(n);
    is.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(n * sizeof(float)));
    if (!is) throw std::runtime_error("read_tensor: truncated payload in " + path);
    auto t = Tensor<T>::create(shape);
    for (std::size_t i = 0; i < n; ++i) t->data[i] = static_cast<T>(payload[i]);
    return t;
}

/// Write to a sibling temp file, then rename into place so failures never
/// leave a partial file at the target path.
template <typename T>
void write_tensor_atomic(const std::string& path, const Tensor<T>& t) {
    const std::string tmp = path + ".tmp";
    write_tensor(tmp, t);
    std::filesystem::rename(tmp, path);
}

}  // namespace scd
