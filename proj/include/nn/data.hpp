#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "nn/tensor.hpp"

namespace nn {

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Dataset {
    std::string name;
    Tensor<float> images;     // (N,H,W,C), values in [0,1]
    std::vector<int> labels;  // class ids in [0, num_classes)
    int num_classes = 0;

    int size() const { return images.empty() ? 0 : images.dim(0); }
};

// IDX pair (big-endian headers, magic 0x803 for images / 0x801 for labels),
// pixels scaled by 1/255.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// CIFAR-10 binary batches: 3073-byte records, 1 label byte + 3x1024
// channel-planar pixel bytes (row-major 32x32).
Dataset load_cifar10(const std::vector<std::string>& batch_paths);

// Class-conditional blobs: per-class prototype intensities U(0.2,0.8) plus
// N(0, noise) pixel noise, clamped to [0,1]; classes assigned round-robin.
Dataset synthetic_blobs(int n, int classes, int h, int w, int c, uint64_t seed,
                        double noise = 0.08);

// Keep the first n samples in dataset order (clamped to the dataset size).
Dataset subset(const Dataset& ds, int n);

struct FoldSplit {
    int fold = 0;
    std::vector<int> train;
    std::vector<int> val;
};

// Shuffles 0..n-1 once with `seed`, partitions into k contiguous chunks;
// fold i validates on chunk i and trains on the rest.
std::vector<FoldSplit> kfold_split(int n, int k, uint64_t seed);

struct Batch {
    Tensor<float> images;   // (B,H,W,C)
    Tensor<float> one_hot;  // (B,K)
    std::vector<int> labels;
};

// Walks `indices` in a per-epoch shuffled order, emitting the final short
// batch. start_epoch(e) reshuffles deterministically from (seed, e).
class BatchIter {
public:
    BatchIter(const Dataset& ds, std::vector<int> indices, int batch_size, uint64_t seed);

    void start_epoch(int epoch);
    bool next(Batch& out);
    int num_batches() const;

private:
    const Dataset* ds_;
    std::vector<int> base_;     // caller-supplied order, never mutated
    std::vector<int> indices_;  // per-epoch shuffled view of base_
    int batch_size_;
    uint64_t seed_;
    size_t pos_ = 0;
};

// Gathers rows into a (B,H,W,C) batch plus one-hot labels.
Batch gather_batch(const Dataset& ds, const std::vector<int>& indices, size_t begin, size_t end);

}  // namespace nn
