#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rbnn/linalg.hpp"

namespace rbnn {

inline constexpr size_t kImagePixels = 784;
inline constexpr size_t kNumClasses = 10;

// Raw MNIST-style data as stored in the IDX files: one byte per pixel/label.
struct RawDataset {
    size_t count = 0;
    std::vector<uint8_t> images;  // count * 784, row-major per image
    std::vector<uint8_t> labels;  // count values in 0..9
};

// Parses a big-endian IDX image/label file pair. Throws DataError with the
// offending file and offset on bad magic, truncation or count mismatch.
RawDataset load_idx(const std::string& images_path, const std::string& labels_path);

enum class MeanMode {
    dataset,     // single scalar mean over all training-split pixels
    half_range,  // fixed 127.5
};

// x -> (x - mean) / 255 * 2. With a dataset mean the result has zero mean by
// construction; the value range is within [-2, 2] (it is [-1, 1] only when
// mean = 127.5).
Matrix normalize(const RawDataset& raw, double mean);

// Normalized inputs plus labels for one evaluation split.
struct Split {
    Matrix x;                  // n x 784
    std::vector<uint8_t> y;    // n labels
    size_t size() const { return x.rows; }
};

struct DataSplit {
    Split train;       // first 50,000 images of the original training set
    Split validation;  // the last 10,000, original order
    Split test;
    double pixel_mean = 0.0;  // the mean applied by normalize()
};

// Loads train/t10k IDX pairs from dir (standard file names), normalizes and
// splits. train_limit > 0 keeps only the first train_limit training examples
// (the mean is computed over the kept examples).
DataSplit load_mnist_split(const std::string& dir, MeanMode mode, size_t train_limit = 0);

// Exact pixel mean of the first `count` images (integer accumulation).
double pixel_mean_of(const RawDataset& raw, size_t count);

struct Batch {
    Matrix inputs;    // b x dim
    Matrix targets;   // b x classes, one-hot rows
    std::vector<uint8_t> labels;
    std::vector<uint32_t> indices;  // positions within the source split
    size_t size() const { return inputs.rows; }
};

// Deterministic shuffled epoch order over n examples; depends only on
// (seed, epoch).
std::vector<uint32_t> epoch_order(size_t n, uint32_t seed, uint32_t epoch);

// Ordered batch sequence over one split. Training batches are shuffled by
// (seed, epoch); evaluation splits pass shuffle=false and keep file order.
// The final batch of an epoch may be short.
class Batches {
  public:
    Batches(const Split& split, size_t num_classes, size_t batch_size, uint32_t seed,
            uint32_t epoch, bool shuffle);

    size_t count() const;
    Batch get(size_t b) const;
    const std::vector<uint32_t>& order() const { return order_; }

  private:
    const Split& split_;
    size_t num_classes_;
    size_t batch_size_;
    std::vector<uint32_t> order_;
};

Matrix one_hot(const std::vector<uint8_t>& labels, size_t num_classes);

}  // namespace rbnn
