#pragma once

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include "nn/model.hpp"

namespace nn {

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class DType : uint8_t { f32 = 0, f64 = 1 };

struct SavedTensor {
    std::string name;
    DType dtype = DType::f32;
    std::vector<int> shape;
    std::vector<unsigned char> bytes;  // row-major payload, little-endian
};

// Flat binary container: "NNCP" magic, u32 version, u32 tensor count, then
// per tensor (u32 name_len, name, u8 dtype, u8 ndim, ndim x u32 dims,
// u64 payload_bytes, payload). All integers little-endian.
void save_checkpoint(const std::string& path, const std::vector<SavedTensor>& tensors);
std::vector<SavedTensor> load_checkpoint(const std::string& path);

template <class T>
SavedTensor to_saved(const std::string& name, const Tensor<T>& t) {
    static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
    SavedTensor s;
    s.name = name;
    s.dtype = std::is_same_v<T, float> ? DType::f32 : DType::f64;
    s.shape = t.shape();
    s.bytes.resize(size_t(t.size()) * sizeof(T));
    std::memcpy(s.bytes.data(), t.data(), s.bytes.size());
    return s;
}

template <class T>
Tensor<T> from_saved(const SavedTensor& s) {
    static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
    const DType want = std::is_same_v<T, float> ? DType::f32 : DType::f64;
    if (s.dtype != want)
        throw CheckpointError("tensor '" + s.name + "' has a different dtype than requested");
    Tensor<T> t(s.shape);
    if (s.bytes.size() != size_t(t.size()) * sizeof(T))
        throw CheckpointError("tensor '" + s.name + "' payload does not match its shape");
    std::memcpy(t.data(), s.bytes.data(), s.bytes.size());
    return t;
}

// Whole-model save/restore keyed by the layer{i}.{field} names of param_refs.
template <class T>
std::vector<SavedTensor> params_to_tensors(ModelParams<T>& params) {
    std::vector<SavedTensor> out;
    for (const ParamRef<T>& r : param_refs(params)) out.push_back(to_saved(r.name, *r.tensor));
    return out;
}

template <class T>
void params_from_tensors(ModelParams<T>& params, const std::vector<SavedTensor>& saved) {
    std::vector<ParamRef<T>> refs = param_refs(params);
    if (refs.size() != saved.size())
        throw CheckpointError("checkpoint holds " + std::to_string(saved.size()) +
                              " tensors, model expects " + std::to_string(refs.size()));
    for (size_t i = 0; i < refs.size(); ++i) {
        if (saved[i].name != refs[i].name)
            throw CheckpointError("checkpoint tensor '" + saved[i].name + "' where '" +
                                  refs[i].name + "' was expected");
        Tensor<T> t = from_saved<T>(saved[i]);
        if (!t.same_shape(*refs[i].tensor))
            throw CheckpointError("tensor '" + saved[i].name + "' shape " + shape_str(t.shape()) +
                                  " does not match model shape " +
                                  shape_str(refs[i].tensor->shape()));
        *refs[i].tensor = std::move(t);
    }
}

}  // namespace nn
