#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rbnn/model.hpp"
#include "rbnn/train.hpp"

namespace rbnn {

// Storage accounting. The budget never moves: slot_count * initial_bits bits
// serve (recursions+1) sub-networks, so bits/weight shrinks as the network
// grows. 1 kB = 1024 bytes.
struct StorageReport {
    uint64_t slot_count = 0;
    uint32_t initial_bits = 0;
    uint32_t recursions = 0;
    uint64_t total_synapses = 0;
    double bits_per_weight = 0.0;
    uint64_t storage_bits = 0;
    double storage_bytes = 0.0;
    double storage_kb = 0.0;
};

StorageReport storage_report(const BitLedger& ledger);

// Estimated operation counts per single input presentation. Inference uses
// one shift and one add per synapse. The learning estimate is published with
// its formula because it is a derived model, not a measured figure:
//   learning_shift    = frozen_synapses + 2*plastic_synapses
//   learning_add      = frozen_synapses + 3*plastic_synapses
//   learning_multiply = plastic_synapses
// (sign MACs forward over every sub-network and backward over the plastic
// one, plus one multiply+add per plastic synapse for the weight-gradient
// outer product).
struct OpCountReport {
    uint64_t inference_shift = 0;
    uint64_t inference_add = 0;
    uint64_t learning_shift = 0;
    uint64_t learning_add = 0;
    uint64_t learning_multiply = 0;
};

extern const char* const kLearningOpsFormula;

OpCountReport op_counts(const RbnnModel& m);

// Fraction of examples with predict(m, x) != label, evaluated with the
// plastic sub-network binarized. Throws DataError on an empty split.
double evaluate_error(const RbnnModel& m, const Split& split,
                      Backend backend = Backend::real);

enum class ReportFormat { csv, json };

struct ReportRow {
    std::string run_id;
    std::string mode;
    uint32_t iteration = 0;
    uint32_t epoch = 0;
    std::string split;
    double error_rate = 0.0;
    double loss = 0.0;
    int plastic_bits = 0;
    uint64_t hidden_total = 0;
    uint64_t synapses_total = 0;
    double storage_bytes = 0.0;
    double bits_per_weight = 0.0;

    bool operator==(const ReportRow&) const = default;
};

// One row per (iteration, epoch, split in {train, validation, test}).
std::vector<ReportRow> report_rows(const std::vector<IterationRecord>& records,
                                   const std::string& run_id, const std::string& mode,
                                   uint32_t h0, const BitLedger& initial_ledger);

// CSV: '#' comment lines carrying the op-count formula, then the header row
// and data rows; '.' decimal separator, LF line endings, values formatted to
// round-trip exactly. JSON mirrors the same fields.
void emit_report(const std::vector<ReportRow>& rows, const StorageReport& storage,
                 const OpCountReport& ops, const std::string& path, ReportFormat fmt);

std::vector<ReportRow> parse_report_csv(const std::string& path);

}  // namespace rbnn
