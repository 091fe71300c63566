// Copyright (c) bindis contributors.
// SPDX-License-Identifier: Apache-2.0
#include "bindis/artifacts.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace bindis {

namespace {

using nlohmann::json;

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error("cannot write " + path);
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw MissingInputError("cannot open " + path);
    return in;
}

json parse_json(const std::string& text, const std::string& path) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw SchemaMismatchError(path + ": " + e.what());
    }
}

json header_base(const std::string& kind, const std::string& binary_id) {
    json h;
    h["schema_version"] = kArtifactSchemaVersion;
    h["kind"] = kind;
    h["binary"] = binary_id;
    return h;
}

void check_header(const json& h, const std::string& expected_kind,
                  const std::string& path) {
    if (!h.contains("schema_version") ||
        h["schema_version"] != kArtifactSchemaVersion)
        throw SchemaMismatchError(path + ": unsupported schema version");
    if (!h.contains("kind") || h["kind"] != expected_kind)
        throw SchemaMismatchError(path + ": expected a " + expected_kind +
                                  " artifact");
}

// Wraps field extraction so malformed documents surface as schema errors
// with the file name attached.
template <typename F>
auto schema_guard(const std::string& path, F&& f) {
    try {
        return f();
    } catch (const json::exception& e) {
        throw SchemaMismatchError(path + ": " + e.what());
    }
}

json blocks_to_json(const MemBlockSet& blocks) {
    json out = json::object();
    for (const auto& [key, offs] : blocks.boundaries)
        out[key] = offs;
    return out;
}

MemBlockSet blocks_from_json(const json& j) {
    MemBlockSet out;
    for (const auto& [key, offs] : j.items())
        for (const auto& o : offs)
            out.boundaries[key].insert(o.get<int64_t>());
    return out;
}

json metrics_to_json(const MetricReport& m) {
    return json{{"tp", m.tp},
                {"fp", m.fp},
                {"fn", m.fn},
                {"precision", m.precision},
                {"recall", m.recall},
                {"f1", m.f1}};
}

// Header plus one JSON document per line.
std::vector<json> read_jsonl(const std::string& path,
                             const std::string& expected_kind, json& header) {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line))
        throw SchemaMismatchError(path + ": empty artifact");
    header = parse_json(line, path);
    check_header(header, expected_kind, path);
    std::vector<json> records;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        records.push_back(parse_json(line, path));
    }
    return records;
}

} // namespace

void write_ground_truth(const std::string& path, const GroundTruthArtifact& gt) {
    json doc = header_base(gt.kind, gt.binary_id);
    doc["positives"] = gt.positives;
    doc["pad_nops"] = gt.pad_nops;
    auto out = open_out(path);
    out << doc.dump(2) << '\n';
}

GroundTruthArtifact read_ground_truth(const std::string& path,
                                      const std::string& expected_kind) {
    auto in = open_in(path);
    std::stringstream buf;
    buf << in.rdbuf();
    json doc = parse_json(buf.str(), path);
    check_header(doc, expected_kind, path);
    return schema_guard(path, [&] {
        GroundTruthArtifact gt;
        gt.kind = doc.at("kind").get<std::string>();
        gt.binary_id = doc.at("binary").get<std::string>();
        for (const auto& v : doc.at("positives"))
            gt.positives.insert(v.get<size_t>());
        for (const auto& v : doc.at("pad_nops"))
            gt.pad_nops.insert(v.get<size_t>());
        return gt;
    });
}

void write_blocks_artifact(const std::string& path, const BlocksArtifact& b) {
    json doc = header_base(b.kind, b.binary_id);
    doc["blocks"] = blocks_to_json(b.blocks);
    doc["rendered"] = b.rendered;
    doc["skipped"] = b.skipped;
    auto out = open_out(path);
    out << doc.dump(2) << '\n';
}

BlocksArtifact read_blocks_artifact(const std::string& path,
                                    const std::string& expected_kind) {
    auto in = open_in(path);
    std::stringstream buf;
    buf << in.rdbuf();
    json doc = parse_json(buf.str(), path);
    check_header(doc, expected_kind, path);
    return schema_guard(path, [&] {
        BlocksArtifact b;
        b.kind = doc.at("kind").get<std::string>();
        b.binary_id = doc.at("binary").get<std::string>();
        b.blocks = blocks_from_json(doc.at("blocks"));
        b.rendered = doc.at("rendered").get<std::string>();
        b.skipped = doc.at("skipped").get<size_t>();
        return b;
    });
}

void write_dataset(const std::string& path, const DatasetArtifact& ds) {
    json header = header_base("dataset", "");
    header.erase("binary");
    header["task"] = task_name(ds.task);
    header["L"] = ds.L;
    header["vocab_hash"] = ds.vocab_hash;
    header["sequences"] = ds.sequences.size();
    auto out = open_out(path);
    out << header.dump() << '\n';
    for (const auto& seq : ds.sequences) {
        json rec;
        rec["binary"] = seq.binary_id;
        rec["first_offset"] = seq.first_offset;
        rec["fields"] = seq.fields;
        rec["offsets"] = seq.offsets;
        json labels = json::array();
        for (int8_t l : seq.labels)
            labels.push_back(static_cast<int>(l));
        rec["labels"] = labels;
        out << rec.dump() << '\n';
    }
}

DatasetArtifact read_dataset(const std::string& path) {
    json header;
    auto records = read_jsonl(path, "dataset", header);
    return schema_guard(path, [&] {
        DatasetArtifact ds;
        auto t = task_from_name(header.at("task").get<std::string>());
        if (!t)
            throw SchemaMismatchError(path + ": unknown task name");
        ds.task = *t;
        ds.L = header.at("L").get<size_t>();
        ds.vocab_hash = header.at("vocab_hash").get<uint64_t>();
        for (const auto& rec : records) {
            TokenSequence seq;
            seq.task = ds.task;
            seq.binary_id = rec.at("binary").get<std::string>();
            seq.first_offset = rec.at("first_offset").get<size_t>();
            seq.fields =
                rec.at("fields").get<std::vector<std::vector<int32_t>>>();
            seq.offsets = rec.at("offsets").get<std::vector<int64_t>>();
            for (const auto& l : rec.at("labels"))
                seq.labels.push_back(static_cast<int8_t>(l.get<int>()));
            if (seq.fields.size() != task_fields(ds.task))
                throw SchemaMismatchError(path + ": wrong field count");
            for (const auto& f : seq.fields)
                if (f.size() != ds.L)
                    throw SchemaMismatchError(path + ": wrong field length");
            if (seq.offsets.size() != ds.L || seq.labels.size() != ds.L)
                throw SchemaMismatchError(path + ": wrong sequence length");
            ds.sequences.push_back(std::move(seq));
        }
        return ds;
    });
}

void write_predictions(const std::string& path, const PredictionsArtifact& p) {
    json header = header_base("predictions", p.binary_id);
    header["task"] = task_name(p.task);
    header["threshold"] = p.threshold;
    header["vocab_hash"] = p.vocab_hash;
    auto out = open_out(path);
    out << header.dump() << '\n';
    for (const auto& r : p.preds) {
        json rec;
        rec["offset"] = r.offset;
        rec["p1"] = r.p1;
        rec["positive"] = r.positive;
        out << rec.dump() << '\n';
    }
}

PredictionsArtifact read_predictions(const std::string& path) {
    json header;
    auto records = read_jsonl(path, "predictions", header);
    return schema_guard(path, [&] {
        PredictionsArtifact p;
        auto t = task_from_name(header.at("task").get<std::string>());
        if (!t)
            throw SchemaMismatchError(path + ": unknown task name");
        p.task = *t;
        p.binary_id = header.at("binary").get<std::string>();
        p.threshold = header.at("threshold").get<double>();
        p.vocab_hash = header.at("vocab_hash").get<uint64_t>();
        for (const auto& rec : records) {
            PredictionRecord r;
            r.offset = rec.at("offset").get<int64_t>();
            r.p1 = rec.at("p1").get<double>();
            r.positive = rec.at("positive").get<bool>();
            p.preds.push_back(r);
        }
        return p;
    });
}

void write_superset(const std::string& path, const std::string& binary_id,
                    const SupersetListing& listing) {
    json header = header_base("superset", binary_id);
    header["code_size"] = listing.size();
    header["instrs"] = listing.num_instrs;
    header["failures"] = listing.num_failures;
    auto out = open_out(path);
    out << header.dump() << '\n';
    for (size_t off = 0; off < listing.slots.size(); ++off) {
        if (!listing.slots[off])
            continue;
        const DecodedInstr& ins = *listing.slots[off];
        json rec;
        rec["offset"] = off;
        rec["length"] = ins.length;
        rec["text"] = render_instr(ins);
        out << rec.dump() << '\n';
    }
}

void write_report(const std::string& path, const ReportArtifact& r) {
    json doc = header_base("report", r.binary_id);
    if (r.task)
        doc["task"] = *r.task;
    if (r.task_metrics)
        doc["metrics"] = metrics_to_json(*r.task_metrics);
    if (r.boundary) {
        doc["boundary"] = {{"overall", metrics_to_json(r.boundary->overall)},
                           {"global", metrics_to_json(r.boundary->global)},
                           {"stack", metrics_to_json(r.boundary->stack)}};
    }
    auto out = open_out(path);
    out << doc.dump(2) << '\n';
}

} // namespace bindis
