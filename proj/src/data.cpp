#include "nn/data.hpp"

#include <algorithm>
#include <fstream>
#include <random>

namespace nn {

namespace {

std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(in),
                                      std::istreambuf_iterator<char>());
}

uint32_t be32(const std::vector<unsigned char>& b, size_t off, const std::string& path) {
    if (off + 4 > b.size()) throw DataError("truncated file: " + path);
    return (uint32_t(b[off]) << 24) | (uint32_t(b[off + 1]) << 16) | (uint32_t(b[off + 2]) << 8) |
           uint32_t(b[off + 3]);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    const std::vector<unsigned char> ib = read_file(images_path);
    const std::vector<unsigned char> lb = read_file(labels_path);

    const uint32_t imagic = be32(ib, 0, images_path);
    if (imagic != 0x00000803u)
        throw DataError("bad magic in " + images_path + ": expected 0x00000803");
    const uint32_t lmagic = be32(lb, 0, labels_path);
    if (lmagic != 0x00000801u)
        throw DataError("bad magic in " + labels_path + ": expected 0x00000801");

    const uint32_t n = be32(ib, 4, images_path);
    const uint32_t h = be32(ib, 8, images_path);
    const uint32_t w = be32(ib, 12, images_path);
    const uint32_t ln = be32(lb, 4, labels_path);
    if (n != ln)
        throw DataError("count mismatch: " + images_path + " has " + std::to_string(n) +
                        " images but " + labels_path + " has " + std::to_string(ln) + " labels");
    if (n == 0 || h == 0 || w == 0) throw DataError("empty IDX file: " + images_path);

    const size_t need_i = 16 + size_t(n) * h * w;
    if (ib.size() < need_i) throw DataError("truncated file: " + images_path);
    const size_t need_l = 8 + size_t(n);
    if (lb.size() < need_l) throw DataError("truncated file: " + labels_path);

    Dataset ds;
    ds.images = Tensor<float>({int(n), int(h), int(w), 1});
    float* px = ds.images.data();
    for (size_t i = 0; i < size_t(n) * h * w; ++i) px[i] = float(ib[16 + i]) / 255.0f;

    ds.labels.resize(n);
    int maxl = 0;
    for (uint32_t i = 0; i < n; ++i) {
        ds.labels[i] = int(lb[8 + i]);
        maxl = std::max(maxl, ds.labels[i]);
    }
    ds.num_classes = std::max(maxl + 1, 2);
    ds.name = "idx";
    return ds;
}

Dataset load_cifar10(const std::vector<std::string>& batch_paths) {
    if (batch_paths.empty()) throw DataError("load_cifar10: no batch files given");
    constexpr size_t kRec = 3073;
    constexpr int kHW = 32;

    size_t total = 0;
    std::vector<std::vector<unsigned char>> blobs;
    for (const std::string& p : batch_paths) {
        std::vector<unsigned char> b = read_file(p);
        if (b.empty() || b.size() % kRec != 0)
            throw DataError("file length of " + p + " is not a multiple of 3073");
        total += b.size() / kRec;
        blobs.push_back(std::move(b));
    }

    Dataset ds;
    ds.images = Tensor<float>({int(total), kHW, kHW, 3});
    ds.labels.resize(total);
    ds.num_classes = 10;
    ds.name = "cifar10";

    size_t n = 0;
    for (const auto& b : blobs) {
        for (size_t r = 0; r + kRec <= b.size(); r += kRec, ++n) {
            const unsigned char* rec = b.data() + r;
            const int label = int(rec[0]);
            if (label > 9) throw DataError("cifar10 label out of range: " + std::to_string(label));
            ds.labels[n] = label;
            for (int c = 0; c < 3; ++c) {
                const unsigned char* plane = rec + 1 + c * kHW * kHW;
                for (int y = 0; y < kHW; ++y)
                    for (int x = 0; x < kHW; ++x)
                        ds.images.at(int(n), y, x, c) = float(plane[y * kHW + x]) / 255.0f;
            }
        }
    }
    return ds;
}

Dataset synthetic_blobs(int n, int classes, int h, int w, int c, uint64_t seed, double noise) {
    if (classes < 2) throw std::invalid_argument("synthetic_blobs: need at least 2 classes");
    if (n < classes) throw std::invalid_argument("synthetic_blobs: n must be >= classes");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> proto_dist(0.2, 0.8);
    std::normal_distribution<double> noise_dist(0.0, noise);

    const int64_t pix = int64_t(h) * w * c;
    std::vector<double> protos(size_t(classes) * pix);
    for (double& v : protos) v = proto_dist(rng);

    Dataset ds;
    ds.name = "blobs";
    ds.num_classes = classes;
    ds.images = Tensor<float>({n, h, w, c});
    ds.labels.resize(size_t(n));
    float* px = ds.images.data();
    for (int i = 0; i < n; ++i) {
        const int cls = i % classes;
        ds.labels[size_t(i)] = cls;
        const double* proto = protos.data() + size_t(cls) * pix;
        for (int64_t j = 0; j < pix; ++j) {
            const double v = proto[j] + noise_dist(rng);
            px[int64_t(i) * pix + j] = float(std::clamp(v, 0.0, 1.0));
        }
    }
    return ds;
}

Dataset subset(const Dataset& ds, int n) {
    const int total = ds.size();
    n = std::min(n, total);
    if (n <= 0) throw std::invalid_argument("subset: n must be positive");

    const int64_t pix = ds.images.size() / total;
    Dataset out;
    out.name = ds.name;
    out.num_classes = ds.num_classes;
    std::vector<int> shape = ds.images.shape();
    shape[0] = n;
    out.images = Tensor<float>::uninitialized(shape);
    out.labels.assign(ds.labels.begin(), ds.labels.begin() + n);
    std::copy_n(ds.images.data(), int64_t(n) * pix, out.images.data());
    return out;
}

std::vector<FoldSplit> kfold_split(int n, int k, uint64_t seed) {
    if (k < 2) throw std::invalid_argument("kfold_split: k must be >= 2");
    if (n < k) throw std::invalid_argument("kfold_split: n=" + std::to_string(n) +
                                           " is smaller than k=" + std::to_string(k));
    std::vector<int> idx(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) idx[size_t(i)] = i;
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);

    const int base = n / k, rem = n % k;
    std::vector<FoldSplit> folds(static_cast<size_t>(k));
    int pos = 0;
    for (int f = 0; f < k; ++f) {
        const int len = base + (f < rem ? 1 : 0);
        folds[size_t(f)].fold = f;
        folds[size_t(f)].val.assign(idx.begin() + pos, idx.begin() + pos + len);
        folds[size_t(f)].train.reserve(size_t(n - len));
        folds[size_t(f)].train.insert(folds[size_t(f)].train.end(), idx.begin(),
                                      idx.begin() + pos);
        folds[size_t(f)].train.insert(folds[size_t(f)].train.end(), idx.begin() + pos + len,
                                      idx.end());
        pos += len;
    }
    return folds;
}

Batch gather_batch(const Dataset& ds, const std::vector<int>& indices, size_t begin, size_t end) {
    const int b = int(end - begin);
    std::vector<int> shape = ds.images.shape();
    shape[0] = b;
    const int64_t pix = ds.images.size() / ds.size();

    Batch out;
    out.images = Tensor<float>::uninitialized(shape);
    out.one_hot = Tensor<float>({b, ds.num_classes});
    out.labels.resize(size_t(b));
    for (int i = 0; i < b; ++i) {
        const int src = indices[begin + size_t(i)];
        std::copy_n(ds.images.data() + int64_t(src) * pix, pix,
                    out.images.data() + int64_t(i) * pix);
        const int lbl = ds.labels[size_t(src)];
        out.labels[size_t(i)] = lbl;
        out.one_hot.at(i, lbl) = 1.0f;
    }
    return out;
}

BatchIter::BatchIter(const Dataset& ds, std::vector<int> indices, int batch_size, uint64_t seed)
    : ds_(&ds), base_(std::move(indices)), indices_(base_), batch_size_(batch_size), seed_(seed) {
    if (batch_size_ < 1) throw std::invalid_argument("BatchIter: batch_size must be >= 1");
    if (base_.empty()) throw std::invalid_argument("BatchIter: empty index list");
}

void BatchIter::start_epoch(int epoch) {
    indices_ = base_;
    std::mt19937_64 rng(seed_ + uint64_t(epoch) * 0x9e3779b97f4a7c15ULL);
    std::shuffle(indices_.begin(), indices_.end(), rng);
    pos_ = 0;
}

bool BatchIter::next(Batch& out) {
    if (pos_ >= indices_.size()) return false;
    const size_t end = std::min(pos_ + size_t(batch_size_), indices_.size());
    out = gather_batch(*ds_, indices_, pos_, end);
    pos_ = end;
    return true;
}

int BatchIter::num_batches() const {
    return int((indices_.size() + size_t(batch_size_) - 1) / size_t(batch_size_));
}

}  // namespace nn
