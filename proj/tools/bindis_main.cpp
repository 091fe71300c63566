// Copyright (c) bindis contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Pipeline driver. Every stage is a subcommand reading and writing the
// JSON/JSONL artifacts declared in artifacts.hpp; reruns with the same seed
// produce byte-identical outputs. Failures exit nonzero with a one-line
// machine-readable error object on stderr.

#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bindis/artifacts.hpp"
#include "bindis/dataset.hpp"
#include "bindis/elf.hpp"
#include "bindis/eval.hpp"
#include "bindis/groundtruth.hpp"
#include "bindis/nn/serialize.hpp"
#include "bindis/nn/train.hpp"
#include "bindis/vsa.hpp"

namespace {

using namespace bindis;

std::string binary_id_of(const std::string& path) {
    return std::filesystem::path(path).stem().string();
}

Task parse_task(const std::string& name) {
    auto t = task_from_name(name);
    if (!t)
        throw SchemaMismatchError("unknown task name: " + name);
    return *t;
}

// Offsets of the true instruction stream plus per-function CFGs; the
// common preamble of every analysis stage.
struct Analysis {
    BinaryImage img;
    SupersetListing listing;
    SweepResult sweep;
    std::vector<FunctionCFG> cfgs;
    std::map<size_t, uint16_t> callee_pops;
};

Analysis analyze(const std::string& bin_path, bool with_functions) {
    Analysis a;
    a.img = load_elf(bin_path);
    a.listing = superset_disassemble(a.img.code);
    a.sweep = linear_sweep_ground_truth(a.img);
    if (with_functions) {
        a.cfgs = functions_from_symbols(a.img, a.listing, a.sweep);
        for (const auto& fn : a.cfgs)
            if (fn.ret_pops)
                a.callee_pops[fn.entry] = *fn.ret_pops;
    }
    return a;
}

const char* gt_kind_for(Task t) {
    switch (t) {
    case Task::T1: return "gt_entries";
    case Task::T2: return "gt_instrs";
    case Task::T3: return "gt_brel";
    }
    return "gt_entries";
}

void run_superset(const std::string& bin, const std::string& out) {
    BinaryImage img = load_elf(bin);
    SupersetListing listing = superset_disassemble(img.code);
    write_superset(out, binary_id_of(bin), listing);
}

void run_gt_entries(const std::string& bin, const std::string& out) {
    Analysis a = analyze(bin, false);
    GroundTruthArtifact gt;
    gt.kind = "gt_entries";
    gt.binary_id = binary_id_of(bin);
    for (uint32_t vaddr : function_entry_ground_truth(a.img))
        if (auto off = a.img.offset_of(vaddr))
            gt.positives.insert(*off);
    gt.pad_nops = a.sweep.nop_offsets;
    write_ground_truth(out, gt);
}

void run_gt_instrs(const std::string& bin, const std::string& out) {
    Analysis a = analyze(bin, false);
    GroundTruthArtifact gt;
    gt.kind = "gt_instrs";
    gt.binary_id = binary_id_of(bin);
    gt.positives.insert(a.sweep.offsets.begin(), a.sweep.offsets.end());
    gt.pad_nops = a.sweep.nop_offsets;
    write_ground_truth(out, gt);
}

void run_gt_blocks(const std::string& bin, const std::string& out) {
    Analysis a = analyze(bin, true);
    RawBlockSet raw = ext_blk_bnd_dwarf(a.img, a.cfgs, a.listing);
    BlocksArtifact art;
    art.kind = "gt_blocks";
    art.binary_id = binary_id_of(bin);
    art.blocks.boundaries = raw.boundaries;
    art.rendered = render_mem_blocks(art.blocks);
    art.skipped = raw.skipped;
    write_blocks_artifact(out, art);
}

void run_gt_brel(const std::string& bin, const std::string& out,
                 const VsaConfig& vsa_cfg) {
    Analysis a = analyze(bin, true);
    RawBlockSet raw = ext_blk_bnd_dwarf(a.img, a.cfgs, a.listing);
    GroundTruthArtifact gt;
    gt.kind = "gt_brel";
    gt.binary_id = binary_id_of(bin);
    for (const auto& fn : a.cfgs) {
        VsaResult vsa = func_wise_vsa(fn, a.listing, a.img.regions,
                                      a.callee_pops, vsa_cfg);
        BRelResult brel =
            id_instr_touch_mem(fn, a.listing, a.img.regions, raw, vsa);
        gt.positives.insert(brel.instrs.begin(), brel.instrs.end());
    }
    gt.pad_nops = a.sweep.nop_offsets;
    write_ground_truth(out, gt);
}

void run_dataset(const std::string& bin, const std::string& gt_path,
                 Task task, size_t L, const std::string& out) {
    Analysis a = analyze(bin, false);
    DatasetConfig cfg;
    cfg.L = L;
    cfg.task = task;
    auto seqs = build_sequences(a.listing, cfg, a.img.regions,
                                binary_id_of(bin));

    GroundTruthArtifact gt = read_ground_truth(gt_path, gt_kind_for(task));
    TaskLabels labels;
    labels.pad_nops = gt.pad_nops;
    switch (task) {
    case Task::T1: labels.entries = gt.positives; break;
    case Task::T2: labels.true_instrs = gt.positives; break;
    case Task::T3: labels.brel_instrs = gt.positives; break;
    }
    seqs = dedup_sequences(label_sequences(std::move(seqs), labels, task));

    DatasetArtifact ds;
    ds.task = task;
    ds.L = L;
    ds.vocab_hash = cfg.vocab.hash();
    ds.sequences = std::move(seqs);
    write_dataset(out, ds);
}

// Reads one or more dataset files and checks they agree on task, length
// and vocabulary before concatenating them.
DatasetArtifact read_datasets(const std::vector<std::string>& paths) {
    DatasetArtifact merged;
    bool first = true;
    for (const auto& p : paths) {
        DatasetArtifact ds = read_dataset(p);
        if (first) {
            merged = std::move(ds);
            first = false;
            continue;
        }
        if (ds.task != merged.task)
            throw SchemaMismatchError(p + ": task differs from earlier inputs");
        if (ds.L != merged.L)
            throw SchemaMismatchError(p + ": sequence length differs from earlier inputs");
        if (ds.vocab_hash != merged.vocab_hash)
            throw VocabMismatchError(p + ": vocabulary differs from earlier inputs");
        for (auto& s : ds.sequences)
            merged.sequences.push_back(std::move(s));
    }
    return merged;
}

void run_train(const std::vector<std::string>& data, uint64_t seed,
               const nn::TrainConfig& tc_in, const nn::LossConfig& lc,
               const std::string& out) {
    DatasetArtifact ds = read_datasets(data);
    TokenVocab vocab;
    if (ds.vocab_hash != vocab.hash())
        throw VocabMismatchError("dataset was built with a different vocabulary");

    nn::ModelConfig cfg = nn::default_model_config(ds.task, vocab,
                                                   static_cast<int>(ds.L));
    cfg.seed = seed;
    nn::TrainConfig tc = tc_in;
    tc.seed = seed;

    auto result = nn::train<float>(ds.sequences, cfg, lc, tc);
    nn::save_model(out, result.params, cfg);

    nlohmann::json status{{"steps", result.steps},
                          {"train_f1", result.train_f1},
                          {"final_loss", result.loss_curve.empty()
                                             ? 0.0
                                             : result.loss_curve.back()}};
    std::cout << status.dump() << '\n';
}

void run_predict(const std::string& model_path, const std::string& data,
                 double threshold, const std::string& out) {
    nn::SavedModel saved = nn::load_model(model_path);
    DatasetArtifact ds = read_dataset(data);
    if (task_fields(ds.task) != saved.cfg.field_dims.size())
        throw SchemaMismatchError("dataset task does not match the model's field layout");
    if (ds.L != static_cast<size_t>(saved.cfg.L))
        throw SchemaMismatchError("dataset sequence length does not match the model");

    auto preds = nn::predict_sequences(ds.sequences, saved.params, saved.cfg,
                                       threshold, ds.vocab_hash);

    PredictionsArtifact art;
    art.task = ds.task;
    art.binary_id =
        ds.sequences.empty() ? "" : ds.sequences.front().binary_id;
    art.threshold = threshold;
    art.vocab_hash = ds.vocab_hash;
    for (const auto& p : preds)
        art.preds.push_back({p.offset, p.p1, p.positive});
    write_predictions(out, art);
}

void run_recover_blocks(const std::string& pred_path, const std::string& bin,
                        const VsaConfig& vsa_cfg, const std::string& out) {
    PredictionsArtifact preds = read_predictions(pred_path);
    if (preds.task != Task::T3)
        throw SchemaMismatchError(pred_path + ": boundary recovery needs boundary-task predictions");
    std::vector<size_t> positives;
    for (const auto& p : preds.preds)
        if (p.positive && p.offset >= 0)
            positives.push_back(static_cast<size_t>(p.offset));

    Analysis a = analyze(bin, true);
    MemBlockSet merged;
    for (const auto& fn : a.cfgs) {
        VsaResult vsa = func_wise_vsa(fn, a.listing, a.img.regions,
                                      a.callee_pops, vsa_cfg);
        MemBlockSet blocks = get_mem_blocks_from_disa(
            fn, a.listing, a.img.regions, positives, vsa);
        for (const auto& [key, offs] : blocks.boundaries)
            merged.boundaries[key].insert(offs.begin(), offs.end());
    }

    BlocksArtifact art;
    art.kind = "memblocks";
    art.binary_id = binary_id_of(bin);
    art.blocks = std::move(merged);
    art.rendered = render_mem_blocks(art.blocks);
    write_blocks_artifact(out, art);
}

void run_eval(const std::string& pred_path, const std::string& gt_path,
              const std::string& pred_blocks_path,
              const std::string& gt_blocks_path, const std::string& out) {
    ReportArtifact report;
    bool any = false;

    if (!pred_path.empty() || !gt_path.empty()) {
        if (pred_path.empty() || gt_path.empty())
            throw MissingInputError("task evaluation needs both --pred and --gt");
        PredictionsArtifact preds = read_predictions(pred_path);
        GroundTruthArtifact gt =
            read_ground_truth(gt_path, gt_kind_for(preds.task));
        Verdicts v;
        for (const auto& p : preds.preds) {
            v.predicted.push_back(p.positive ? 1 : 0);
            const auto off = static_cast<size_t>(p.offset);
            if (gt.pad_nops.count(off))
                v.truth.push_back(Truth::Pad);
            else if (gt.positives.count(off))
                v.truth.push_back(Truth::Positive);
            else
                v.truth.push_back(Truth::Negative);
        }
        report.binary_id = preds.binary_id;
        report.task = task_name(preds.task);
        report.task_metrics = prf1(v);
        any = true;
    }

    if (!pred_blocks_path.empty() || !gt_blocks_path.empty()) {
        if (pred_blocks_path.empty() || gt_blocks_path.empty())
            throw MissingInputError("boundary evaluation needs both --pred-blocks and --gt-blocks");
        BlocksArtifact pred = read_blocks_artifact(pred_blocks_path, "memblocks");
        BlocksArtifact truth = read_blocks_artifact(gt_blocks_path, "gt_blocks");
        if (report.binary_id.empty())
            report.binary_id = pred.binary_id;
        report.boundary = boundary_prf1(pred.blocks, truth.blocks);
        any = true;
    }

    if (!any)
        throw MissingInputError("nothing to evaluate: give --pred/--gt or --pred-blocks/--gt-blocks");
    write_report(out, report);
}

const char* error_name(const Error& e) {
    if (dynamic_cast<const SchemaMismatchError*>(&e)) return "SchemaMismatch";
    if (dynamic_cast<const VocabMismatchError*>(&e)) return "VocabMismatch";
    if (dynamic_cast<const MissingInputError*>(&e)) return "MissingInput";
    if (dynamic_cast<const MissingGroundTruthError*>(&e)) return "MissingGroundTruth";
    if (dynamic_cast<const TruncatedFileError*>(&e)) return "TruncatedFile";
    if (dynamic_cast<const NotElfError*>(&e)) return "NotElf";
    if (dynamic_cast<const WrongClassError*>(&e)) return "WrongClass";
    if (dynamic_cast<const NoSymbolsError*>(&e)) return "NoSymbols";
    if (dynamic_cast<const MalformedDwarfError*>(&e)) return "MalformedDwarf";
    if (dynamic_cast<const DecodeGapError*>(&e)) return "DecodeGap";
    if (dynamic_cast<const DivergedLossError*>(&e)) return "DivergedLoss";
    if (dynamic_cast<const EmptyCallsiteListError*>(&e)) return "EmptyCallsiteList";
    return "Error";
}

int fail(const std::string& name, const std::string& message) {
    nlohmann::json err{{"error", name}, {"message", message}};
    std::cerr << err.dump() << '\n';
    return 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Superset-disassembly pipeline: decoding, ground truth, "
                 "datasets, training, prediction and boundary recovery"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read option defaults from a configuration file");
    app.set_version_flag("--version", "bindis 0.1.0");

    int workers = 1;
    app.add_option("--workers", workers,
                   "Upper bound on worker threads; results never depend on it")
        ->check(CLI::PositiveNumber);

    std::string bin, gt_path, model_path, pred_path, out;
    std::string pred_blocks_path, gt_blocks_path;
    std::vector<std::string> data_paths;
    std::string task_str = "t1";
    uint64_t seed = 0;
    double threshold = 0.5;
    size_t seq_len = 512;
    VsaConfig vsa_cfg;
    nn::TrainConfig tc;
    nn::LossConfig lc;

    auto* sup = app.add_subcommand("superset", "Decode at every byte offset of the code section");
    sup->add_option("bin", bin, "32-bit x86 ELF binary")->required();
    sup->add_option("-o,--out", out, "Output JSONL listing")->required();

    auto* gte = app.add_subcommand("gt-entries", "Function entry ground truth from the symbol table");
    gte->add_option("bin", bin)->required();
    gte->add_option("-o,--out", out)->required();

    auto* gti = app.add_subcommand("gt-instrs", "True instruction ground truth from a linear sweep");
    gti->add_option("bin", bin)->required();
    gti->add_option("-o,--out", out)->required();

    auto* gtb = app.add_subcommand("gt-blocks", "Memory-block boundaries from debug variable locations");
    gtb->add_option("bin", bin)->required();
    gtb->add_option("-o,--out", out)->required();

    auto* gtr = app.add_subcommand("gt-brel", "Boundary-related instruction labels from value tracking");
    gtr->add_option("bin", bin)->required();
    gtr->add_option("-o,--out", out)->required();
    gtr->add_option("--k-cap", vsa_cfg.k_cap, "Value-set size cap");
    gtr->add_option("--widen-after", vsa_cfg.widen_after, "Joins per block before widening");

    auto* dat = app.add_subcommand("dataset", "Labeled token sequences for one task");
    dat->add_option("bin", bin)->required();
    dat->add_option("--gt", gt_path, "Ground truth artifact for the task")->required();
    dat->add_option("--task", task_str)->check(CLI::IsMember({"t1", "t2", "t3"}));
    dat->add_option("--seq-len", seq_len, "Positions per sequence");
    dat->add_option("-o,--out", out)->required();

    auto* trn = app.add_subcommand("train", "Train the sequence classifier");
    trn->add_option("--data", data_paths, "Dataset files (repeatable)")->required();
    trn->add_option("--seed", seed, "Initialisation and shuffling seed");
    trn->add_option("--lr", tc.lr);
    trn->add_option("--batch-size", tc.batch_size);
    trn->add_option("--epochs", tc.epochs);
    trn->add_option("--max-steps", tc.max_steps);
    trn->add_option("--warmup-frac", tc.warmup_frac);
    trn->add_option("--dropout", tc.dropout);
    trn->add_option("--target-f1", tc.target_f1, "Stop once training F1 reaches this");
    trn->add_option("--eval-every", tc.eval_every);
    trn->add_option("--threshold", tc.threshold);
    trn->add_option("--alpha", lc.alpha, "Positive-class loss weight");
    trn->add_option("--gamma", lc.gamma, "Loss focusing exponent");
    trn->add_option("-o,--out", out)->required();

    auto* prd = app.add_subcommand("predict", "Per-instruction verdicts from a trained model");
    prd->add_option("--model", model_path)->required();
    prd->add_option("--data", data_paths)->required();
    prd->add_option("--threshold", threshold, "Positive verdict cutoff");
    prd->add_option("-o,--out", out)->required();

    auto* rec = app.add_subcommand("recover-blocks", "Memory-block boundaries from boundary-task predictions");
    rec->add_option("--pred", pred_path)->required();
    rec->add_option("--bin", bin)->required();
    rec->add_option("--k-cap", vsa_cfg.k_cap);
    rec->add_option("--widen-after", vsa_cfg.widen_after);
    rec->add_option("-o,--out", out)->required();

    auto* evl = app.add_subcommand("eval", "Score predictions against ground truth");
    evl->add_option("--pred", pred_path, "Predictions artifact");
    evl->add_option("--gt", gt_path, "Matching ground truth artifact");
    evl->add_option("--pred-blocks", pred_blocks_path, "Recovered boundary artifact");
    evl->add_option("--gt-blocks", gt_blocks_path, "Boundary ground truth artifact");
    evl->add_option("-o,--out", out)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("Usage", e.what());
    }

    try {
        if (sup->parsed())
            run_superset(bin, out);
        else if (gte->parsed())
            run_gt_entries(bin, out);
        else if (gti->parsed())
            run_gt_instrs(bin, out);
        else if (gtb->parsed())
            run_gt_blocks(bin, out);
        else if (gtr->parsed())
            run_gt_brel(bin, out, vsa_cfg);
        else if (dat->parsed())
            run_dataset(bin, gt_path, parse_task(task_str), seq_len, out);
        else if (trn->parsed())
            run_train(data_paths, seed, tc, lc, out);
        else if (prd->parsed()) {
            if (data_paths.size() != 1)
                throw MissingInputError("predict takes exactly one --data file");
            run_predict(model_path, data_paths.front(), threshold, out);
        } else if (rec->parsed())
            run_recover_blocks(pred_path, bin, vsa_cfg, out);
        else if (evl->parsed())
            run_eval(pred_path, gt_path, pred_blocks_path, gt_blocks_path, out);
    } catch (const Error& e) {
        return fail(error_name(e), e.what());
    } catch (const std::exception& e) {
        return fail("Internal", e.what());
    }
    return 0;
}
