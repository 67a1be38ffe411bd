// mvrec command-line tool: dataset-build, views, embed-validate, eval, export-features.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mvrec/mvrec.hpp"

namespace fs = std::filesystem;
using namespace mvrec;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitUser = 2;

bool is_internal(ErrorCode c) {
  switch (c) {
    case ErrorCode::NonFiniteLoss:
    case ErrorCode::UntrainedState:
    case ErrorCode::IndexOutOfRange:
    case ErrorCode::ShapeMismatch: return true;
    default: return false;
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto end = s.find(',', start);
    if (end == std::string::npos) end = s.size();
    if (end > start) out.push_back(s.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

template <typename T>
std::vector<T> parse_numbers(const std::string& s, const char* what) {
  std::vector<T> out;
  for (const auto& item : split_list(s)) {
    T v{};
    auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    require(ec == std::errc{} && p == item.data() + item.size(), ErrorCode::InvalidArgument,
            std::string("bad ") + what + " value '" + item + "'");
    out.push_back(v);
  }
  require(!out.empty(), ErrorCode::InvalidArgument, std::string("empty ") + what + " list");
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  require(out.good(), ErrorCode::IoError, "write failed: " + path.string());
}

// ---------------------------------------------------------------------------

struct AugmentArgs {
  int num_scale = 3;
  int num_offset = 9;
  std::string scale_factors = "1,1.5,2";
  double offset_fraction = 1.0 / 8.0;
  double base_crop_fraction = 1.0 / 3.0;
  bool rotation = false;
  bool flip = false;
  std::string mask_mode = "instance";

  void add(CLI::App* app) {
    app->add_option("--num-scale", num_scale, "Number of crop scales")->capture_default_str();
    app->add_option("--num-offset", num_offset, "Offsets per scale: 1 or 9 (3x3 grid)")->capture_default_str();
    app->add_option("--scale-factors", scale_factors, "Comma-separated crop multipliers")->capture_default_str();
    app->add_option("--offset-fraction", offset_fraction, "Offset step as a fraction of the crop side")
        ->capture_default_str();
    app->add_option("--base-crop-fraction", base_crop_fraction, "Base crop side as a fraction of min(H, W)")
        ->capture_default_str();
    app->add_flag("--rotation", rotation, "Add 0/90/180/270 degree rotations (x4 views)");
    app->add_flag("--flip", flip, "Add horizontal flips (x2 views)");
    app->add_option("--mask-mode", mask_mode, "instance | full_foreground | none")->capture_default_str();
  }

  AugmentConfig config() const {
    AugmentConfig c;
    c.num_scale = num_scale;
    c.num_offset = num_offset;
    c.scale_factors = parse_numbers<double>(scale_factors, "scale factor");
    c.offset_fraction = offset_fraction;
    c.base_crop_fraction = base_crop_fraction;
    c.enable_rotation = rotation;
    c.enable_flip = flip;
    c.mask_mode = parse_mask_mode(mask_mode);
    c.validate();
    return c;
  }
};

nlohmann::ordered_json augment_json(const AugmentConfig& c) {
  nlohmann::ordered_json j;
  j["num_scale"] = c.num_scale;
  j["num_offset"] = c.num_offset;
  j["scale_factors"] = c.scale_factors;
  j["offset_fraction"] = c.offset_fraction;
  j["base_crop_fraction"] = c.base_crop_fraction;
  j["rotation"] = c.enable_rotation;
  j["flip"] = c.enable_flip;
  j["mask_mode"] = std::string(to_string(c.mask_mode));
  j["views_per_instance"] = c.views_per_instance();
  return j;
}

// ---------------------------------------------------------------------------

struct DatasetBuildArgs {
  std::string root;
  std::string layout = "mvtec";
  std::string categories;
  std::string dataset_name;
  std::string exclude_types = "good,combined";
  long long min_area = 1;
  std::size_t k_max = 1;
  int connectivity = 8;
  std::uint64_t seed = 0;
  std::size_t threads = default_thread_count();
  std::string out;
};

int cmd_dataset_build(const DatasetBuildArgs& a) {
  BuildOptions opt;
  require(a.layout == "mvtec" || a.layout == "bbox-csv", ErrorCode::InvalidArgument,
          "layout must be mvtec or bbox-csv");
  require(a.connectivity == 4 || a.connectivity == 8, ErrorCode::InvalidArgument, "connectivity must be 4 or 8");
  opt.layout = a.layout == "mvtec" ? DatasetLayout::MvtecMask : DatasetLayout::BboxCsv;
  opt.root = a.root;
  opt.categories = split_list(a.categories);
  opt.dataset_name = a.dataset_name;
  opt.exclude_types = split_list(a.exclude_types);
  opt.min_area = a.min_area;
  opt.k_max = a.k_max;
  opt.connectivity = a.connectivity == 4 ? Connectivity::Four : Connectivity::Eight;
  opt.seed = a.seed;
  opt.threads = a.threads;
  const auto manifests = build_manifests(opt);
  write_manifests(a.out, manifests);
  std::size_t classes = 0, instances = 0;
  for (const auto& m : manifests) {
    classes += m.classes.size();
    instances += m.instances.size();
  }
  std::cout << "datasets=" << manifests.size() << " classes=" << classes << " instances=" << instances << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct ViewsArgs {
  std::string manifest;
  std::string out;
  std::string ablation_set;
  AugmentArgs augment;
};

int cmd_views(const ViewsArgs& a) {
  const auto manifests = read_manifests(a.manifest);
  auto cfg = a.augment.config();
  if (!a.ablation_set.empty()) cfg = ablation_config(a.ablation_set, cfg);
  const auto views = generate_all_views(manifests, cfg);
  write_views(a.out, views);
  std::cout << "views=" << views.size() << " per_instance=" << cfg.views_per_instance() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct EmbedValidateArgs {
  std::string manifest;
  std::string views;
  std::string embeddings;
  std::uint32_t channels = 0;
  bool lenient = false;
};

int cmd_embed_validate(const EmbedValidateArgs& a) {
  const auto views = read_views(a.views);
  LoadOptions opt;
  opt.strict = !a.lenient;
  opt.expected_channels = a.channels;
  const auto loaded = load_embeddings(fs::path(a.embeddings), views, opt);
  if (!a.manifest.empty()) check_coverage(read_manifests(a.manifest), loaded.embeddings);
  std::cout << "instances=" << loaded.embeddings.size() << " channels=" << loaded.channels
            << " backbone=" << (loaded.backbone_tag.empty() ? "-" : loaded.backbone_tag)
            << " missing=" << loaded.missing.size() << " unexpected=" << loaded.unexpected_keys.size() << '\n';
  for (const auto& m : loaded.missing)
    std::cout << "missing instance=" << m.instance_id << " expected=" << m.expected << " found=" << m.found << '\n';
  for (const auto& k : loaded.unexpected_keys) std::cout << "unexpected key=" << k << '\n';
  return loaded.missing.empty() && loaded.unexpected_keys.empty() ? kExitOk : kExitUser;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string backend = "synthetic";
  // file backend
  std::string manifest;
  std::string views;
  std::string embeddings;
  std::vector<std::string> variants;  // region ablation: name=views_path:embeddings_path
  // synthetic backend
  std::size_t synthetic_datasets = 1;
  std::size_t num_classes = 5;
  std::size_t instances_per_class = 20;
  std::uint32_t channels = 32;
  double sigma_inst = 0.05;
  double sigma_view = 0.2;
  std::uint64_t data_seed = 0;
  AugmentArgs augment;
  // experiment
  std::string classifiers = "zip,zip_f,tip,tip_f,knn,protonet,linearprob,clip_adapter";
  std::string ks = "1,3,5";
  std::string seeds = "0,1,2,3,4";
  std::string ablation = "none";
  std::size_t threads = default_thread_count();
  std::vector<std::string> formats = {"json", "csv", "text"};
  std::string out_dir = "mvrec_out";
  // classifier settings
  double zip_beta = 32.0;
  double tip_beta = 32.0;
  double beta = 1.0;
  double alpha = 0.5;
  double lambda = 4.0;
  double lr = 1e-4;
  std::size_t iterations = 500;
  bool no_train_cache = false;
  bool no_train_zip = false;
  bool raw_cache = false;
  std::string mining = "batch-hard";
  bool normalize_before_average = false;
};

ClassifierConfig classifier_config(const EvalArgs& a) {
  ClassifierConfig c;
  c.zip_beta = a.zip_beta;
  c.tip_beta = a.tip_beta;
  c.zip_f.beta = a.beta;
  c.zip_f.alpha = a.alpha;
  c.zip_f.lambda = a.lambda;
  c.zip_f.lr = a.lr;
  c.zip_f.iterations = a.iterations;
  require(a.mining == "batch-hard" || a.mining == "batch-all", ErrorCode::InvalidArgument,
          "mining must be batch-hard or batch-all");
  c.zip_f.mining = a.mining == "batch-hard" ? TripletMining::BatchHard : TripletMining::BatchAll;
  c.zip_f.validate();
  c.tip_f.beta = a.beta;
  c.tip_f.lr = a.lr;
  c.tip_f.iterations = a.iterations;
  c.train_cache = !a.no_train_cache;
  c.train_zip = !a.no_train_zip;
  c.adapt_cache = !a.raw_cache;
  c.baseline.lr = a.lr;
  c.baseline.iterations = a.iterations;
  return c;
}

nlohmann::ordered_json config_echo(const EvalArgs& a, const ExperimentSpec& spec, const AugmentConfig& augment) {
  nlohmann::ordered_json j;
  j["backend"] = a.backend;
  if (a.backend == "synthetic") {
    j["synthetic"] = {{"datasets", a.synthetic_datasets},   {"num_classes", a.num_classes},
                      {"instances_per_class", a.instances_per_class}, {"channels", a.channels},
                      {"sigma_inst", a.sigma_inst},         {"sigma_view", a.sigma_view},
                      {"seed", a.data_seed}};
    j["augment"] = augment_json(augment);
  } else {
    j["manifest"] = a.manifest;
    j["views"] = a.views;
    j["embeddings"] = a.embeddings;
    j["variants"] = a.variants;
  }
  std::vector<std::string> names;
  for (auto k : spec.classifiers) names.emplace_back(to_string(k));
  j["classifiers"] = names;
  j["ks"] = spec.ks;
  j["seeds"] = spec.seeds;
  j["ablation"] = a.ablation;
  const auto& c = spec.config;
  j["zip"] = {{"beta", c.zip_beta}};
  j["tip"] = {{"beta", c.tip_beta}};
  j["zip_f"] = {{"beta", c.zip_f.beta},
                {"alpha", c.zip_f.alpha},
                {"lambda", c.zip_f.lambda},
                {"lr", c.zip_f.lr},
                {"iterations", c.zip_f.iterations},
                {"mining", a.mining},
                {"train_cache", c.train_cache},
                {"train_zip", c.train_zip},
                {"adapt_cache", c.adapt_cache}};
  j["tip_f"] = {{"beta", c.tip_f.beta}, {"lambda", c.tip_f.lambda}, {"lr", c.tip_f.lr},
                {"iterations", c.tip_f.iterations}};
  j["baselines"] = {{"lr", c.baseline.lr},
                    {"iterations", c.baseline.iterations},
                    {"clip_adapter_reduction", c.clip_adapter.reduction},
                    {"clip_adapter_blend", c.clip_adapter.blend},
                    {"clip_adapter_logit_scale", c.clip_adapter.logit_scale}};
  j["normalize_before_average"] = a.normalize_before_average;
  return j;
}

EmbeddingMap load_variant(const std::string& views_path, const std::string& emb_path, bool normalize) {
  LoadOptions opt;
  opt.normalize_before_average = normalize;
  return load_embeddings(fs::path(emb_path), read_views(views_path), opt).embeddings;
}

EmbeddingMap synthetic_map(const std::vector<DatasetManifest>& manifests, const AugmentConfig& augment,
                           const SyntheticConfig& cfg, bool normalize) {
  const auto views = generate_all_views(manifests, augment);
  LoadOptions opt;
  opt.normalize_before_average = normalize;
  return load_embeddings(synthetic_embeddings(manifests, views, cfg), views, opt).embeddings;
}

int cmd_eval(const EvalArgs& a) {
  ExperimentSpec spec;
  spec.classifiers = parse_classifier_list(a.classifiers);
  require(!spec.classifiers.empty(), ErrorCode::InvalidArgument, "empty classifier list");
  spec.ks = parse_numbers<std::size_t>(a.ks, "K");
  spec.seeds = parse_numbers<std::uint64_t>(a.seeds, "seed");
  spec.config = classifier_config(a);
  spec.threads = std::max<std::size_t>(1, a.threads);
  std::vector<ReportFormat> formats;
  for (const auto& f : a.formats) formats.push_back(parse_report_format(f));
  require(a.ablation == "none" || a.ablation == "training" || a.ablation == "augmentation" || a.ablation == "region",
          ErrorCode::InvalidArgument, "ablation must be none, training, augmentation or region");
  const AugmentConfig augment = a.augment.config();

  std::vector<DatasetManifest> manifests;
  SyntheticConfig syn;
  if (a.backend == "synthetic") {
    require(a.synthetic_datasets >= 1, ErrorCode::InvalidArgument, "need at least one synthetic dataset");
    for (std::size_t d = 0; d < a.synthetic_datasets; ++d)
      manifests.push_back(make_synthetic_manifest("synthetic" + std::to_string(d), a.num_classes,
                                                  a.instances_per_class, a.data_seed));
    syn.channels = a.channels;
    syn.sigma_inst = a.sigma_inst;
    syn.sigma_view = a.sigma_view;
    syn.seed = a.data_seed;
  } else {
    require(a.backend == "file", ErrorCode::InvalidArgument, "backend must be synthetic or file");
    require(!a.manifest.empty(), ErrorCode::InvalidArgument, "--manifest is required with --backend file");
    manifests = read_manifests(a.manifest);
  }

  std::vector<ResultTable> tables;
  if (a.ablation == "augmentation") {
    std::vector<EmbeddingMap> maps;
    maps.reserve(kAblationViewSets.size());
    if (a.backend == "synthetic") {
      for (auto name : kAblationViewSets)
        maps.push_back(synthetic_map(manifests, ablation_config(name, augment), syn, a.normalize_before_average));
    } else {
      fail(ErrorCode::InvalidArgument, "augmentation ablation with --backend file: pass one --variant per set");
    }
    std::vector<EmbeddingVariant> variants;
    for (std::size_t i = 0; i < maps.size(); ++i) variants.push_back({std::string(kAblationViewSets[i]), &maps[i]});
    tables.push_back(run_embedding_variants("augmentation", manifests, variants, spec));
  } else if (a.ablation == "region") {
    require(!a.variants.empty(), ErrorCode::InvalidArgument,
            "region ablation needs --variant name=views_path:embeddings_path (one per crop/mask setting)");
    std::vector<std::string> names;
    std::vector<EmbeddingMap> maps;
    maps.reserve(a.variants.size());
    for (const auto& v : a.variants) {
      const auto eq = v.find('=');
      const auto colon = v.find(':', eq == std::string::npos ? 0 : eq);
      require(eq != std::string::npos && colon != std::string::npos, ErrorCode::InvalidArgument,
              "variant must be name=views_path:embeddings_path, got '" + v + "'");
      names.push_back(v.substr(0, eq));
      maps.push_back(load_variant(v.substr(eq + 1, colon - eq - 1), v.substr(colon + 1), a.normalize_before_average));
    }
    std::vector<EmbeddingVariant> variants;
    for (std::size_t i = 0; i < maps.size(); ++i) variants.push_back({names[i], &maps[i]});
    tables.push_back(run_embedding_variants("region", manifests, variants, spec));
  } else {
    EmbeddingMap embeddings;
    if (a.backend == "synthetic") {
      embeddings = synthetic_map(manifests, augment, syn, a.normalize_before_average);
    } else {
      require(!a.views.empty() && !a.embeddings.empty(), ErrorCode::InvalidArgument,
              "--views and --embeddings are required with --backend file");
      embeddings = load_variant(a.views, a.embeddings, a.normalize_before_average);
    }
    if (a.ablation == "training") {
      tables.push_back(run_training_ablation(manifests, embeddings, spec));
    } else {
      tables.push_back(run_experiment(manifests, embeddings, spec));
    }
  }

  fs::create_directories(a.out_dir);
  for (const auto& t : tables) {
    for (auto f : formats) {
      const fs::path path = fs::path(a.out_dir) / (t.name + std::string(file_extension(f)));
      emit_report(t, f, path);
      if (f == ReportFormat::Text) std::cout << report_text(t);
    }
  }
  write_text(fs::path(a.out_dir) / "config.json", config_echo(a, spec, augment).dump(2) + "\n");
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct ExportArgs {
  std::string manifest;
  std::string views;
  std::string embeddings;
  std::string out;
  bool normalize_before_average = false;
};

int cmd_export_features(const ExportArgs& a) {
  const auto manifests = read_manifests(a.manifest);
  std::map<std::string, std::string> labels;
  for (const auto& m : manifests)
    for (const auto& inst : m.instances) labels[inst.instance_id] = inst.class_label;
  LoadOptions opt;
  opt.normalize_before_average = a.normalize_before_average;
  const auto loaded = load_embeddings(fs::path(a.embeddings), read_views(a.views), opt);
  const auto rows = export_features_csv(loaded.embeddings, labels, a.out);
  std::cout << "rows=" << rows << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mvrec: multi-view region-context few-shot defect classification"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from a TOML/INI file; command-line flags win");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.set_version_flag("--version", "mvrec 0.1.0");

  DatasetBuildArgs build;
  auto* c_build = app.add_subcommand("dataset-build", "Build instance-level manifests from an image/mask folder layout");
  c_build->add_option("--root", build.root, "Dataset root (MVTec-AD layout or annotations.csv folder)")->required();
  c_build->add_option("--layout", build.layout, "mvtec | bbox-csv")->capture_default_str();
  c_build->add_option("--categories", build.categories, "Comma-separated categories (default: all)");
  c_build->add_option("--dataset-name", build.dataset_name, "Dataset name for bbox-csv layouts");
  c_build->add_option("--exclude-types", build.exclude_types, "Defect-type folders to skip")->capture_default_str();
  c_build->add_option("--min-area", build.min_area, "Drop components smaller than this")->capture_default_str();
  c_build->add_option("--k-max", build.k_max, "Drop classes with fewer than 2*k_max instances")
      ->capture_default_str();
  c_build->add_option("--connectivity", build.connectivity, "4 or 8")->capture_default_str();
  c_build->add_option("--seed", build.seed, "Split seed")->capture_default_str();
  c_build->add_option("--threads", build.threads, "Worker threads");
  c_build->add_option("--out", build.out, "Output manifest (JSON)")->required();

  ViewsArgs views;
  auto* c_views = app.add_subcommand("views", "Write the views file for every instance of a manifest");
  c_views->add_option("--manifest", views.manifest, "Manifest file")->required();
  c_views->add_option("--out", views.out, "Output views file (JSON Lines)")->required();
  c_views->add_option("--ablation-set", views.ablation_set,
                      "One of none, scale, rotate, flip, offset, scale+rotate, scale+flip, scale+offset");
  views.augment.add(c_views);

  EmbedValidateArgs validate;
  auto* c_validate = app.add_subcommand("embed-validate", "Check an MVE1 embedding file against its views file");
  c_validate->add_option("--views", validate.views, "Views file")->required();
  c_validate->add_option("--embeddings", validate.embeddings, "MVE1 embedding file")->required();
  c_validate->add_option("--manifest", validate.manifest, "Also check coverage of this manifest");
  c_validate->add_option("--channels", validate.channels, "Required channel count (0 = any)");
  c_validate->add_flag("--lenient", validate.lenient, "Report missing views instead of failing on the first");

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "Run N-way K-shot experiments and write reports");
  c_eval->add_option("--backend", eval.backend, "synthetic | file")->capture_default_str();
  c_eval->add_option("--manifest", eval.manifest, "Manifest (file backend)");
  c_eval->add_option("--views", eval.views, "Views file (file backend)");
  c_eval->add_option("--embeddings", eval.embeddings, "MVE1 embeddings (file backend)");
  c_eval->add_option("--variant", eval.variants, "Region ablation input: name=views_path:embeddings_path");
  c_eval->add_option("--synthetic-datasets", eval.synthetic_datasets, "Synthetic datasets")->capture_default_str();
  c_eval->add_option("--num-classes", eval.num_classes, "Synthetic classes per dataset")->capture_default_str();
  c_eval->add_option("--instances-per-class", eval.instances_per_class, "Synthetic instances per class")
      ->capture_default_str();
  c_eval->add_option("--channels", eval.channels, "Synthetic embedding channels")->capture_default_str();
  c_eval->add_option("--sigma-inst", eval.sigma_inst, "Synthetic instance noise")->capture_default_str();
  c_eval->add_option("--sigma-view", eval.sigma_view, "Synthetic view noise")->capture_default_str();
  c_eval->add_option("--data-seed", eval.data_seed, "Synthetic data and split seed")->capture_default_str();
  eval.augment.add(c_eval);
  c_eval->add_option("--classifiers", eval.classifiers, "Comma-separated classifier list")->capture_default_str();
  c_eval->add_option("--k", eval.ks, "Comma-separated K list")->capture_default_str();
  c_eval->add_option("--seeds", eval.seeds, "Comma-separated support sampling seeds")->capture_default_str();
  c_eval->add_option("--ablation", eval.ablation, "none | training | augmentation | region")->capture_default_str();
  c_eval->add_option("--threads", eval.threads, "Worker threads");
  c_eval->add_option("--format", eval.formats, "Report formats: json csv text")->capture_default_str();
  c_eval->add_option("--out-dir", eval.out_dir, "Report directory")->capture_default_str();
  c_eval->add_option("--zip-beta", eval.zip_beta, "Zip-Adapter sharpness")->capture_default_str();
  c_eval->add_option("--tip-beta", eval.tip_beta, "Tip-Adapter sharpness")->capture_default_str();
  c_eval->add_option("--beta", eval.beta, "Zip-Adapter-F / Tip-Adapter-F sharpness")->capture_default_str();
  c_eval->add_option("--alpha", eval.alpha, "Triplet margin")->capture_default_str();
  c_eval->add_option("--lambda", eval.lambda, "Triplet weight")->capture_default_str();
  c_eval->add_option("--lr", eval.lr, "AdamW learning rate")->capture_default_str();
  c_eval->add_option("--iterations", eval.iterations, "Training iterations")->capture_default_str();
  c_eval->add_flag("--no-train-cache", eval.no_train_cache, "Freeze the cache features of Zip-Adapter-F");
  c_eval->add_flag("--no-train-zip", eval.no_train_zip, "Freeze the ZIP module of Zip-Adapter-F");
  c_eval->add_flag("--raw-cache", eval.raw_cache, "Compare queries against the cache without passing it through ZIP");
  c_eval->add_option("--mining", eval.mining, "batch-hard | batch-all")->capture_default_str();
  c_eval->add_flag("--normalize-before-average", eval.normalize_before_average,
                   "L2-normalise each view before averaging");

  ExportArgs exp;
  auto* c_export = app.add_subcommand("export-features", "Write averaged features as CSV (instance_id,class,f...)");
  c_export->add_option("--manifest", exp.manifest, "Manifest file")->required();
  c_export->add_option("--views", exp.views, "Views file")->required();
  c_export->add_option("--embeddings", exp.embeddings, "MVE1 embedding file")->required();
  c_export->add_option("--out", exp.out, "Output CSV")->required();
  c_export->add_flag("--normalize-before-average", exp.normalize_before_average,
                     "L2-normalise each view before averaging");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "InvalidArgument: " << e.what() << '\n';
    return kExitUser;
  }

  try {
    if (*c_build) return cmd_dataset_build(build);
    if (*c_views) return cmd_views(views);
    if (*c_validate) return cmd_embed_validate(validate);
    if (*c_eval) return cmd_eval(eval);
    if (*c_export) return cmd_export_features(exp);
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return is_internal(e.code()) ? kExitInternal : kExitUser;
  } catch (const std::exception& e) {
    std::cerr << "Internal: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitInternal;
}
