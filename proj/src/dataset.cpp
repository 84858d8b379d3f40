#include "rbnn/dataset.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>

#include "rbnn/errors.hpp"
#include "rbnn/rng.hpp"

namespace rbnn {

namespace {

constexpr uint32_t kImagesMagic = 0x00000803;
constexpr uint32_t kLabelsMagic = 0x00000801;

uint32_t read_be32(std::ifstream& f, const std::string& path, size_t offset) {
    std::array<unsigned char, 4> b{};
    f.read(reinterpret_cast<char*>(b.data()), 4);
    if (!f)
        throw DataError(path + ": truncated header at offset " + std::to_string(offset));
    return (uint32_t(b[0]) << 24) | (uint32_t(b[1]) << 16) | (uint32_t(b[2]) << 8) |
           uint32_t(b[3]);
}

std::ifstream open_binary(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError(path + ": cannot open");
    return f;
}

}  // namespace

RawDataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream fi = open_binary(images_path);
    const uint32_t imagic = read_be32(fi, images_path, 0);
    if (imagic != kImagesMagic)
        throw DataError(images_path + ": unexpected magic 0x" + [&] {
            char buf[16];
            std::snprintf(buf, sizeof buf, "%08x", imagic);
            return std::string(buf);
        }() + " at offset 0 (want 00000803)");
    const uint32_t n = read_be32(fi, images_path, 4);
    const uint32_t rows = read_be32(fi, images_path, 8);
    const uint32_t cols = read_be32(fi, images_path, 12);
    if (rows != 28 || cols != 28)
        throw DataError(images_path + ": unexpected image dimensions " +
                        std::to_string(rows) + "x" + std::to_string(cols) +
                        " at offset 8 (want 28x28)");

    RawDataset ds;
    ds.count = n;
    ds.images.resize(size_t(n) * kImagePixels);
    fi.read(reinterpret_cast<char*>(ds.images.data()),
            static_cast<std::streamsize>(ds.images.size()));
    if (fi.gcount() != static_cast<std::streamsize>(ds.images.size()))
        throw DataError(images_path + ": truncated image data at offset " +
                        std::to_string(16 + fi.gcount()));

    std::ifstream fl = open_binary(labels_path);
    const uint32_t lmagic = read_be32(fl, labels_path, 0);
    if (lmagic != kLabelsMagic)
        throw DataError(labels_path + ": unexpected magic at offset 0 (want 00000801)");
    const uint32_t ln = read_be32(fl, labels_path, 4);
    if (ln != n)
        throw DataError(labels_path + ": label count " + std::to_string(ln) +
                        " does not match image count " + std::to_string(n));
    ds.labels.resize(n);
    fl.read(reinterpret_cast<char*>(ds.labels.data()), n);
    if (fl.gcount() != static_cast<std::streamsize>(n))
        throw DataError(labels_path + ": truncated label data at offset " +
                        std::to_string(8 + fl.gcount()));
    for (size_t i = 0; i < ds.labels.size(); ++i)
        if (ds.labels[i] > 9)
            throw DataError(labels_path + ": label " + std::to_string(ds.labels[i]) +
                            " out of range at offset " + std::to_string(8 + i));
    return ds;
}

double pixel_mean_of(const RawDataset& raw, size_t count) {
    // Pixels are integers, so the sum is exact in 64 bits.
    uint64_t sum = 0;
    const size_t n = count * kImagePixels;
    for (size_t i = 0; i < n; ++i) sum += raw.images[i];
    return static_cast<double>(sum) / static_cast<double>(n);
}

Matrix normalize(const RawDataset& raw, double mean) {
    Matrix out(raw.count, kImagePixels);
    const double scale = 2.0 / 255.0;
    for (size_t i = 0; i < raw.images.size(); ++i)
        out.data[i] = (static_cast<double>(raw.images[i]) - mean) * scale;
    return out;
}

DataSplit load_mnist_split(const std::string& dir, MeanMode mode, size_t train_limit) {
    const std::string base = dir.empty() ? std::string(".") : dir;
    RawDataset train_raw = load_idx(base + "/train-images-idx3-ubyte",
                                    base + "/train-labels-idx1-ubyte");
    RawDataset test_raw =
        load_idx(base + "/t10k-images-idx3-ubyte", base + "/t10k-labels-idx1-ubyte");

    if (train_raw.count <= 10000)
        throw DataError(base + ": training set has " + std::to_string(train_raw.count) +
                        " examples, need more than the 10,000 reserved for validation");

    const size_t val_n = 10000;
    const size_t full_train_n = train_raw.count - val_n;
    size_t train_n = full_train_n;
    if (train_limit > 0 && train_limit < train_n) train_n = train_limit;

    RawDataset train_part, val_part;
    train_part.count = train_n;
    train_part.images.assign(train_raw.images.begin(),
                             train_raw.images.begin() + train_n * kImagePixels);
    train_part.labels.assign(train_raw.labels.begin(), train_raw.labels.begin() + train_n);
    val_part.count = val_n;
    val_part.images.assign(train_raw.images.begin() + full_train_n * kImagePixels,
                           train_raw.images.end());
    val_part.labels.assign(train_raw.labels.begin() + full_train_n, train_raw.labels.end());

    const double mean =
        mode == MeanMode::half_range ? 127.5 : pixel_mean_of(train_part, train_part.count);

    DataSplit ds;
    ds.pixel_mean = mean;
    ds.train = {normalize(train_part, mean), std::move(train_part.labels)};
    ds.validation = {normalize(val_part, mean), std::move(val_part.labels)};
    ds.test = {normalize(test_raw, mean), std::move(test_raw.labels)};
    return ds;
}

std::vector<uint32_t> epoch_order(size_t n, uint32_t seed, uint32_t epoch) {
    std::vector<uint32_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = static_cast<uint32_t>(i);
    std::mt19937_64 g(mix64(seed, 0x73687566666c65ull, epoch));  // "shuffle" stream
    shuffle_values(order, g);
    return order;
}

Matrix one_hot(const std::vector<uint8_t>& labels, size_t num_classes) {
    Matrix t(labels.size(), num_classes);
    for (size_t i = 0; i < labels.size(); ++i) t.at(i, labels[i]) = 1.0;
    return t;
}

Batches::Batches(const Split& split, size_t num_classes, size_t batch_size, uint32_t seed,
                 uint32_t epoch, bool shuffle)
    : split_(split), num_classes_(num_classes), batch_size_(batch_size) {
    if (batch_size_ == 0) throw ConfigError("batch_size must be >= 1");
    if (shuffle) {
        order_ = epoch_order(split.size(), seed, epoch);
    } else {
        order_.resize(split.size());
        for (size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<uint32_t>(i);
    }
}

size_t Batches::count() const {
    return (order_.size() + batch_size_ - 1) / batch_size_;
}

Batch Batches::get(size_t b) const {
    const size_t begin = b * batch_size_;
    const size_t end = std::min(begin + batch_size_, order_.size());
    Batch out;
    out.inputs = Matrix(end - begin, split_.x.cols);
    out.labels.resize(end - begin);
    out.indices.assign(order_.begin() + begin, order_.begin() + end);
    for (size_t r = begin; r < end; ++r) {
        const uint32_t src = order_[r];
        const double* from = split_.x.row(src);
        std::copy(from, from + split_.x.cols, out.inputs.row(r - begin));
        out.labels[r - begin] = split_.y[src];
    }
    out.targets = one_hot(out.labels, num_classes_);
    return out;
}

}  // namespace rbnn
