#include "rbnn/metrics.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rbnn/errors.hpp"

namespace rbnn {

const char* const kLearningOpsFormula =
    "learning_shift = frozen_synapses + 2*plastic_synapses; "
    "learning_add = frozen_synapses + 3*plastic_synapses; "
    "learning_multiply = plastic_synapses (per input presentation)";

StorageReport storage_report(const BitLedger& ledger) {
    StorageReport r;
    r.slot_count = ledger.slot_count;
    r.initial_bits = ledger.initial_bits;
    r.recursions = ledger.recursion_index;
    r.total_synapses = ledger.slot_count * (uint64_t(ledger.recursion_index) + 1);
    r.bits_per_weight =
        double(ledger.initial_bits) / (double(ledger.recursion_index) + 1.0);
    r.storage_bits = ledger.slot_count * ledger.initial_bits;
    r.storage_bytes = double(r.storage_bits) / 8.0;
    r.storage_kb = r.storage_bytes / 1024.0;
    return r;
}

OpCountReport op_counts(const RbnnModel& m) {
    OpCountReport r;
    const uint64_t slots = m.ledger.slot_count;
    const uint64_t frozen = slots * m.frozen.size();
    const uint64_t plastic = m.plastic ? slots : 0;
    const uint64_t total = frozen + plastic;
    r.inference_shift = total;
    r.inference_add = total;
    r.learning_shift = frozen + 2 * plastic;
    r.learning_add = frozen + 3 * plastic;
    r.learning_multiply = plastic;
    return r;
}

double evaluate_error(const RbnnModel& m, const Split& split, Backend backend) {
    return evaluate_split(m, split, backend).error_rate();
}

std::vector<ReportRow> report_rows(const std::vector<IterationRecord>& records,
                                   const std::string& run_id, const std::string& mode,
                                   uint32_t h0, const BitLedger& initial_ledger) {
    std::vector<ReportRow> rows;
    const double storage_bytes =
        double(initial_ledger.slot_count * initial_ledger.initial_bits) / 8.0;
    for (const IterationRecord& rec : records) {
        const uint64_t subnets = uint64_t(rec.recursion_index) + 1;
        ReportRow base;
        base.run_id = run_id;
        base.mode = mode;
        base.iteration = rec.recursion_index;
        base.plastic_bits = rec.plastic_bits;
        base.hidden_total = uint64_t(h0) * subnets;
        base.synapses_total = initial_ledger.slot_count * subnets;
        base.storage_bytes = storage_bytes;
        base.bits_per_weight = double(initial_ledger.initial_bits) / double(subnets);
        for (const EpochStats& es : rec.epochs) {
            base.epoch = es.epoch;
            base.split = "train";
            base.error_rate = es.train_error;
            base.loss = es.train_loss;
            rows.push_back(base);
            base.split = "validation";
            base.error_rate = es.val_error;
            base.loss = es.val_loss;
            rows.push_back(base);
            base.split = "test";
            base.error_rate = es.test_error;
            base.loss = es.test_loss;
            rows.push_back(base);
        }
    }
    return rows;
}

namespace {

std::string fmt_double(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s, const std::string& where) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw IoError("report: bad number '" + s + "' in " + where);
    return v;
}

nlohmann::json storage_json(const StorageReport& s) {
    return {{"slot_count", s.slot_count},
            {"initial_bits", s.initial_bits},
            {"recursions", s.recursions},
            {"total_synapses", s.total_synapses},
            {"bits_per_weight", s.bits_per_weight},
            {"storage_bits", s.storage_bits},
            {"storage_bytes", s.storage_bytes},
            {"storage_kb", s.storage_kb}};
}

nlohmann::json ops_json(const OpCountReport& o) {
    return {{"inference_shift", o.inference_shift},
            {"inference_add", o.inference_add},
            {"learning_shift", o.learning_shift},
            {"learning_add", o.learning_add},
            {"learning_multiply", o.learning_multiply},
            {"formula", kLearningOpsFormula}};
}

}  // namespace

void emit_report(const std::vector<ReportRow>& rows, const StorageReport& storage,
                 const OpCountReport& ops, const std::string& path, ReportFormat fmt) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError(path + ": cannot open for writing");

    if (fmt == ReportFormat::csv) {
        f << "# learning ops: " << kLearningOpsFormula << "\n";
        f << "# final model: synapses=" << storage.total_synapses
          << " bits_per_weight=" << fmt_double(storage.bits_per_weight)
          << " storage_bytes=" << fmt_double(storage.storage_bytes)
          << " inference_shift=" << ops.inference_shift
          << " inference_add=" << ops.inference_add
          << " learning_shift=" << ops.learning_shift
          << " learning_add=" << ops.learning_add
          << " learning_multiply=" << ops.learning_multiply << "\n";
        f << "run_id,mode,iteration,epoch,split,error_rate,loss,plastic_bits,"
             "hidden_total,synapses_total,storage_bytes,bits_per_weight\n";
        for (const ReportRow& r : rows) {
            f << r.run_id << ',' << r.mode << ',' << r.iteration << ',' << r.epoch << ','
              << r.split << ',' << fmt_double(r.error_rate) << ',' << fmt_double(r.loss)
              << ',' << r.plastic_bits << ',' << r.hidden_total << ','
              << r.synapses_total << ',' << fmt_double(r.storage_bytes) << ','
              << fmt_double(r.bits_per_weight) << '\n';
        }
    } else {
        nlohmann::json j;
        j["storage"] = storage_json(storage);
        j["op_counts"] = ops_json(ops);
        nlohmann::json jrows = nlohmann::json::array();
        for (const ReportRow& r : rows) {
            jrows.push_back({{"run_id", r.run_id},
                             {"mode", r.mode},
                             {"iteration", r.iteration},
                             {"epoch", r.epoch},
                             {"split", r.split},
                             {"error_rate", r.error_rate},
                             {"loss", r.loss},
                             {"plastic_bits", r.plastic_bits},
                             {"hidden_total", r.hidden_total},
                             {"synapses_total", r.synapses_total},
                             {"storage_bytes", r.storage_bytes},
                             {"bits_per_weight", r.bits_per_weight}});
        }
        j["rows"] = std::move(jrows);
        f << j.dump(2) << "\n";
    }
    if (!f) throw IoError(path + ": write failed");
}

std::vector<ReportRow> parse_report_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError(path + ": cannot open");
    std::vector<ReportRow> rows;
    std::string line;
    bool saw_header = false;
    size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        if (!saw_header) {
            saw_header = true;  // column header
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 12)
            throw IoError(path + ": line " + std::to_string(lineno) + " has " +
                          std::to_string(cells.size()) + " fields, want 12");
        const std::string where = path + ":" + std::to_string(lineno);
        ReportRow r;
        r.run_id = cells[0];
        r.mode = cells[1];
        r.iteration = uint32_t(parse_double(cells[2], where));
        r.epoch = uint32_t(parse_double(cells[3], where));
        r.split = cells[4];
        r.error_rate = parse_double(cells[5], where);
        r.loss = parse_double(cells[6], where);
        r.plastic_bits = int(parse_double(cells[7], where));
        r.hidden_total = uint64_t(parse_double(cells[8], where));
        r.synapses_total = uint64_t(parse_double(cells[9], where));
        r.storage_bytes = parse_double(cells[10], where);
        r.bits_per_weight = parse_double(cells[11], where);
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace rbnn
