// Copyright (c) 2026 The echoone Authors
// SPDX-License-Identifier: Apache-2.0

#include "echoone/cli/commands.hpp"

#include <array>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "echoone/atlas/atlas.hpp"
#include "echoone/cli/config.hpp"
#include "echoone/harmonize/geometry.hpp"
#include "echoone/harmonize/mhd_io.hpp"
#include "echoone/metrics/report.hpp"
#include "echoone/model/bundle.hpp"
#include "echoone/model/predict.hpp"
#include "echoone/train/engine.hpp"

namespace echoone {

namespace fs = std::filesystem;

namespace {

int guarded(std::ostream& log, const std::function<int()>& body) {
  try {
    return body();
  } catch (const NumericalFailure& e) {
    log << "error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return 2;
  }
}

RunConfig load_config(const CommonArgs& c) {
  return parse_run_config(c.config_path, c.overrides, c.seed, c.no_lffa, c.no_pcmask);
}

/// Cavity synthesis for band-only annotations: when a mask has myocardium
/// but no cavity label, the enclosed region is filled in as label 2.
/// Pixels that already carry a label are never overwritten.
void synthesize_cavity(GrayImage& unified, Plane plane) {
  bool has_myo = false, has_cavity = false;
  for (std::uint8_t v : unified.pix) {
    has_myo |= v == 3;
    has_cavity |= v == 2;
  }
  if (!has_myo || has_cavity) return;
  GrayImage myo(unified.h, unified.w);
  for (size_t i = 0; i < unified.pix.size(); ++i) myo.pix[i] = unified.pix[i] == 3;
  GrayImage cavity = fill_cavity(myo, plane);
  for (size_t i = 0; i < unified.pix.size(); ++i)
    if (cavity.pix[i] && unified.pix[i] == 0) unified.pix[i] = 2;
}

std::string plane_header() { return "2CH\t3CH\t4CH\tPSAX"; }

std::vector<ManifestRecord> load_split(const std::string& manifest_dir,
                                       const std::string& split) {
  return read_manifest((fs::path(manifest_dir) / (split + ".tsv")).string());
}

/// Lineage verification: the atlas must be the exact file the bundle was
/// trained against, and the encoder the exact file the atlas was built from.
void check_lineage(const BundleInfo* bundle, const std::string& atlas_path,
                   const PriorAtlas* atlas, const std::string& encoder_path) {
  if (bundle && !bundle->atlas_hash.empty()) {
    if (atlas_path.empty())
      throw DataError("bundle was trained with an atlas; pass --atlas");
    const std::string h = file_hash_hex(atlas_path);
    if (h != bundle->atlas_hash)
      throw HashMismatch("atlas file hash " + h + " does not match the bundle's " +
                         bundle->atlas_hash);
  }
  if (atlas && !atlas->encoder_hash.empty()) {
    if (encoder_path.empty())
      throw DataError("atlas references an encoder; pass --encoder");
    const std::string h = file_hash_hex(encoder_path);
    if (h != atlas->encoder_hash)
      throw HashMismatch("encoder file hash " + h + " does not match the atlas's " +
                         atlas->encoder_hash);
  }
}

}  // namespace

int run_harmonize(const HarmonizeArgs& args, std::ostream& log) {
  return guarded(log, [&]() -> int {
    RunConfig cfg = load_config(args.common);
    const std::string root = cfg.get_str("data.root");
    if (root.empty()) throw DataError("data.root is not set");
    if (!fs::is_directory(root)) throw LayoutError("data.root is not a directory: " + root);

    std::vector<std::string> datasets;
    for (const auto& entry : fs::directory_iterator(root)) {
      if (entry.is_directory())
        datasets.push_back(entry.path().filename().string());
      else
        throw LayoutError("unexpected file in data root: " + entry.path().string());
    }
    std::sort(datasets.begin(), datasets.end());
    if (datasets.empty()) throw LayoutError("no dataset directories under " + root);

    const fs::path out(args.common.out);
    fs::create_directories(out / "manifests");

    std::vector<ManifestRecord> records;
    std::map<std::string, std::array<long, kNumPlanes>> counts;
    long skipped = 0;
    for (const std::string& ds : datasets) {
      const fs::path ds_root = fs::path(root) / ds;
      const fs::path remap_path = ds_root / "remap.cfg";
      if (!fs::exists(remap_path))
        throw DataError("dataset '" + ds + "': missing remap.cfg");
      RemapTable table = parse_remap_table(remap_path.string());
      counts.emplace(ds, std::array<long, kNumPlanes>{0, 0, 0, 0});

      for (const DatasetItem& item : scan_dataset(ds_root.string())) {
        GrayImage raw = read_png_gray(item.mask_path);
        GrayImage unified;
        try {
          unified = remap_mask(raw, table);
        } catch (const UnknownLabel& e) {
          throw UnknownLabel(e.label, item.mask_path);
        }
        try {
          synthesize_cavity(unified, item.plane);
        } catch (const DegenerateShape& e) {
          log << "skip " << item.mask_path << ": " << e.what() << "\n";
          ++skipped;
          continue;
        } catch (const EmptyCavity& e) {
          log << "skip " << item.mask_path << ": " << e.what() << "\n";
          ++skipped;
          continue;
        }
        const fs::path mask_dir = out / "masks" / ds / item.subject_id;
        fs::create_directories(mask_dir);
        const fs::path mask_path = mask_dir / (item.frame + "_mask.png");
        write_png_gray(mask_path.string(), unified);

        ManifestRecord rec;
        rec.image_path = fs::absolute(item.image_path).lexically_normal().string();
        rec.mask_path = fs::absolute(mask_path).lexically_normal().string();
        rec.plane = item.plane;
        rec.subject_id = item.subject_id;
        rec.dataset_id = ds;
        records.push_back(std::move(rec));
        ++counts[ds][static_cast<size_t>(item.plane)];
      }
    }
    if (records.empty()) throw InsufficientData("no usable images after harmonization");

    // Subject-level split on dataset-qualified ids so equal subject names in
    // different datasets stay independent.
    std::set<std::string> subject_keys;
    for (const auto& r : records) subject_keys.insert(r.dataset_id + "/" + r.subject_id);
    std::vector<std::string> train_s, val_s, test_s;
    split_subjects(std::vector<std::string>(subject_keys.begin(), subject_keys.end()),
                   cfg.get_u64("data.split_seed"), train_s, val_s, test_s);
    std::set<std::string> val_set(val_s.begin(), val_s.end());
    std::set<std::string> test_set(test_s.begin(), test_s.end());

    ManifestSet set;
    for (const auto& r : records) {
      const std::string key = r.dataset_id + "/" + r.subject_id;
      if (val_set.count(key))
        set.val.push_back(r);
      else if (test_set.count(key))
        set.test.push_back(r);
      else
        set.train.push_back(r);
    }
    write_manifests((out / "manifests").string(), set, cfg.hash);

    log << "dataset\t" << plane_header() << "\ttotal\n";
    std::array<long, kNumPlanes> all{0, 0, 0, 0};
    for (const auto& [ds, c] : counts) {
      long row = 0;
      log << ds;
      for (int p = 0; p < kNumPlanes; ++p) {
        log << "\t" << c[static_cast<size_t>(p)];
        row += c[static_cast<size_t>(p)];
        all[static_cast<size_t>(p)] += c[static_cast<size_t>(p)];
      }
      log << "\t" << row << "\n";
    }
    log << "total";
    long grand = 0;
    for (int p = 0; p < kNumPlanes; ++p) {
      log << "\t" << all[static_cast<size_t>(p)];
      grand += all[static_cast<size_t>(p)];
    }
    log << "\t" << grand << "\n";
    if (skipped > 0) log << "skipped " << skipped << " image(s)\n";
    log << "split train/val/test: " << set.train.size() << "/" << set.val.size() << "/"
        << set.test.size() << "\n";
    log << "runconfig " << cfg.hash << "\n";
    return 0;
  });
}

int run_build_priors(const BuildPriorsArgs& args, std::ostream& log) {
  return guarded(log, [&]() -> int {
    RunConfig cfg = load_config(args.common);
    if (args.manifest_dir.empty()) throw DataError("--manifests is required");
    std::vector<ManifestRecord> train = load_split(args.manifest_dir, "train");
    if (train.empty()) throw InsufficientData("train manifest is empty");

    std::vector<Plane> classes;
    const int num_planes = cfg.get_int("atlas.num_planes");
    if (num_planes == 0) {
      std::set<int> seen;
      for (const auto& r : train) seen.insert(static_cast<int>(r.plane));
      for (int p : seen) classes.push_back(static_cast<Plane>(p));
    } else {
      if (num_planes != kNumPlanes)
        throw DataError("atlas.num_planes must be 0 (from data) or " +
                        std::to_string(kNumPlanes));
      for (int p = 0; p < kNumPlanes; ++p) classes.push_back(static_cast<Plane>(p));
    }

    LatentEncoder encoder(cfg.encoder_config(), classes);
    LatentEncoder::TrainStats stats =
        encoder.train(train, cfg.get_int("atlas.encoder_epochs"),
                      static_cast<float>(cfg.get_double("atlas.encoder_lr")),
                      cfg.get_int("atlas.encoder_batch"), cfg.get_u64("atlas.seed"));
    const fs::path out(args.common.out);
    fs::create_directories(out);
    const std::string encoder_path = (out / "encoder.bin").string();
    encoder.save(encoder_path, cfg.hash);
    log << "encoder: " << encoder.params().total_size() << " parameters, train accuracy "
        << format_double(stats.train_accuracy) << "\n";

    int mask_size = cfg.get_int("atlas.mask_size");
    if (mask_size == 0) mask_size = cfg.get_int("model.input_size");
    AtlasBuildResult build =
        build_atlas(train, encoder, cfg.get_int("atlas.k"),
                    cfg.get_int("model.num_structures"), mask_size, cfg.get_u64("atlas.seed"));
    build.atlas.encoder_hash = file_hash_hex(encoder_path);
    build.atlas.runconfig = cfg.hash;
    const std::string atlas_path = (out / "atlas.bin").string();
    build.atlas.save(atlas_path);

    const int k = build.atlas.k;
    std::vector<long> sizes(static_cast<size_t>(k), 0);
    std::vector<std::array<long, kNumPlanes>> table(
        static_cast<size_t>(k), std::array<long, kNumPlanes>{0, 0, 0, 0});
    for (size_t i = 0; i < build.atlas.assignments.size(); ++i) {
      const int c = build.atlas.assignments[i];
      ++sizes[static_cast<size_t>(c)];
      ++table[static_cast<size_t>(c)][static_cast<size_t>(build.planes[i])];
    }
    log << "atlas: k=" << k << ", kmeans objective "
        << format_double(build.clustering.objective) << "\n";
    log << "cluster\tsize\t" << plane_header() << "\n";
    for (int c = 0; c < k; ++c) {
      log << c << "\t" << sizes[static_cast<size_t>(c)];
      for (int p = 0; p < kNumPlanes; ++p)
        log << "\t" << table[static_cast<size_t>(c)][static_cast<size_t>(p)];
      log << "\n";
    }
    log << "wrote " << encoder_path << " and " << atlas_path << "\n";
    log << "runconfig " << cfg.hash << "\n";
    return 0;
  });
}

int run_train(const TrainArgs& args, std::ostream& log) {
  return guarded(log, [&]() -> int {
    RunConfig cfg = load_config(args.common);
    if (args.manifest_dir.empty()) throw DataError("--manifests is required");
    ModelConfig mc = cfg.model_config();
    if (mc.pcmask && (args.atlas_path.empty() || args.encoder_path.empty()))
      throw DataError("--atlas and --encoder are required unless prompting is disabled");

    std::optional<PriorAtlas> atlas;
    std::optional<LatentEncoder> encoder;
    std::string atlas_hash;
    if (!args.atlas_path.empty()) {
      atlas = PriorAtlas::load(args.atlas_path);
      atlas_hash = file_hash_hex(args.atlas_path);
    }
    if (!args.encoder_path.empty()) encoder = LatentEncoder::load(args.encoder_path);
    check_lineage(nullptr, args.atlas_path, atlas ? &*atlas : nullptr, args.encoder_path);

    std::vector<ManifestRecord> train = load_split(args.manifest_dir, "train");
    std::vector<ManifestRecord> val = load_split(args.manifest_dir, "val");

    const int unet_in = atlas ? atlas->k * atlas->num_structures : 0;
    SegModel<float> model(mc, unet_in);
    log << "model: " << model.params().total_size() << " parameters (prompt U-Net "
        << (unet_in > 0 ? (mc.pcmask ? "active" : "present, frozen") : "absent") << ")\n";

    BundleInfo info;
    info.config = mc;
    info.unet_in_channels = unet_in;
    info.atlas_hash = atlas_hash;
    info.runconfig = cfg.hash;

    Trainer trainer(model, atlas ? &*atlas : nullptr, encoder ? &*encoder : nullptr,
                    cfg.train_settings(), train, val);
    RunResult res = trainer.run(args.common.out, info, args.resume);

    log << "trained " << res.epochs_run << " epoch(s); best val mDice "
        << format_double(res.best_val_mdice) << " at epoch " << res.best_epoch << "\n";
    if (res.epochs_to_target > 0)
      log << "target val mDice reached at epoch " << res.epochs_to_target << "\n";
    log << "wrote " << (fs::path(args.common.out) / "bundle.bin").string() << "\n";
    log << "runconfig " << cfg.hash << "\n";
    return 0;
  });
}

int run_eval(const EvalArgs& args, std::ostream& log) {
  return guarded(log, [&]() -> int {
    RunConfig cfg = load_config(args.common);
    if (args.bundle_path.empty()) throw DataError("--bundle is required");
    if (args.manifest_dir.empty()) throw DataError("--manifests is required");
    LoadedBundle lb = load_bundle(args.bundle_path);

    std::optional<PriorAtlas> atlas;
    std::optional<LatentEncoder> encoder;
    if (!args.atlas_path.empty()) atlas = PriorAtlas::load(args.atlas_path);
    if (!args.encoder_path.empty()) encoder = LatentEncoder::load(args.encoder_path);
    check_lineage(&lb.info, args.atlas_path, atlas ? &*atlas : nullptr, args.encoder_path);

    const std::string split = cfg.get_str("eval.split");
    std::vector<ManifestRecord> records = load_split(args.manifest_dir, split);
    if (records.empty()) throw InsufficientData(split + " manifest is empty");

    PredictContext ctx{&lb.model, atlas ? &*atlas : nullptr, encoder ? &*encoder : nullptr};
    const int s = lb.info.config.num_structures;
    Predictor predictor = [&](const ManifestRecord&, const GrayImage& img) {
      return predict_masks(ctx, image_to_tensor<float>(img));
    };
    EvalReport report = evaluate(records, s, lb.info.config.input_size, predictor);

    const fs::path out(args.common.out);
    fs::create_directories(out);
    Json meta;
    meta["runconfig"] = cfg.hash;
    meta["bundle_hash"] = file_hash_hex(args.bundle_path);
    meta["bundle_runconfig"] = lb.info.runconfig;
    meta["split"] = split;
    meta["num_images"] = records.size();
    meta["prompted"] = ctx.prompted();
    write_report_json((out / "report.json").string(), report, meta);
    write_report_csv((out / "report.csv").string(), report.aggregates);

    log << format_plane_table(report.aggregates);
    log << "wrote " << (out / "report.json").string() << " and "
        << (out / "report.csv").string() << "\n";
    log << "runconfig " << cfg.hash << "\n";
    return 0;
  });
}

int run_infer(const InferArgs& args, std::ostream& log) {
  return guarded(log, [&]() -> int {
    RunConfig cfg = load_config(args.common);
    if (args.bundle_path.empty()) throw DataError("--bundle is required");
    if (args.images.empty()) throw DataError("no input images given");
    LoadedBundle lb = load_bundle(args.bundle_path);

    std::optional<PriorAtlas> atlas;
    std::optional<LatentEncoder> encoder;
    if (!args.atlas_path.empty()) atlas = PriorAtlas::load(args.atlas_path);
    if (!args.encoder_path.empty()) encoder = LatentEncoder::load(args.encoder_path);
    check_lineage(&lb.info, args.atlas_path, atlas ? &*atlas : nullptr, args.encoder_path);

    PredictContext ctx{&lb.model, atlas ? &*atlas : nullptr, encoder ? &*encoder : nullptr};
    const fs::path out(args.common.out);
    fs::create_directories(out);
    const int in = lb.info.config.input_size;
    const bool overlay = cfg.get_bool("infer.overlay");

    for (const std::string& path : args.images) {
      GrayImage native = fs::path(path).extension() == ".mhd" ? read_mhd_gray(path)
                                                              : read_png_gray(path);
      GrayImage img = resize_bilinear_u8(native, in, in);
      GrayImage labels = predict_labels(ctx, image_to_tensor<float>(img));
      const std::string stem = fs::path(path).stem().string();
      const fs::path mask_path = out / (stem + "_pred.png");
      write_png_gray(mask_path.string(), labels);
      log << path << " -> " << mask_path.string() << "\n";

      if (overlay) {
        // Light structure contours over the resampled input: LV red,
        // cavity green, myocardium blue.
        RgbImage rgb(in, in);
        for (int y = 0; y < in; ++y)
          for (int x = 0; x < in; ++x)
            for (int c = 0; c < 3; ++c) rgb.at(y, x, c) = img.at(y, x);
        static const std::array<std::array<std::uint8_t, 3>, 3> palette{
            {{255, 96, 96}, {96, 255, 96}, {96, 160, 255}}};
        for (int s = 1; s <= lb.info.config.num_structures; ++s) {
          GrayImage bin(in, in);
          for (int i = 0; i < in * in; ++i)
            bin.pix[static_cast<size_t>(i)] = labels.pix[static_cast<size_t>(i)] == s;
          const auto& color = palette[static_cast<size_t>((s - 1) % 3)];
          for (const auto& [y, x] : boundary_pixels(bin))
            for (int c = 0; c < 3; ++c) rgb.at(y, x, c) = color[static_cast<size_t>(c)];
        }
        const fs::path ov_path = out / (stem + "_overlay.png");
        write_png_rgb(ov_path.string(), rgb);
        log << path << " -> " << ov_path.string() << "\n";
      }
    }
    log << "runconfig " << cfg.hash << "\n";
    return 0;
  });
}

}  // namespace echoone
