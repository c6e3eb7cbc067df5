#include "asymcity/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "asymcity/error.hpp"
#include "asymcity/rng.hpp"
#include "asymcity/svg.hpp"

namespace asymcity {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Reads fields of one config object and rejects keys it did not consume.
class FieldReader {
 public:
  FieldReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ParseError(path_.empty() ? "/" : path_, "expected an object");
  }

  template <typename T>
  void read(const char* key, T& dst) {
    used_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end()) return;
    const std::string where = path_ + "/" + key;
    if constexpr (std::is_same_v<T, int>) {
      if (!it->is_number_integer()) throw ParseError(where, "expected an integer");
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (!it->is_number_unsigned() && !(it->is_number_integer() && it->template get<long long>() >= 0)) {
        throw ParseError(where, "expected a non-negative integer");
      }
    } else if constexpr (std::is_same_v<T, double>) {
      if (!it->is_number()) throw ParseError(where, "expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!it->is_string()) throw ParseError(where, "expected a string");
    }
    dst = it->template get<T>();
  }

  void read_optional_string(const char* key, std::optional<std::string>& dst) {
    used_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end() || it->is_null()) return;
    if (!it->is_string()) throw ParseError(path_ + "/" + key, "expected a string or null");
    dst = it->get<std::string>();
  }

  const json* child(const char* key) {
    used_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!used_.count(it.key())) throw ParseError(path_ + "/" + it.key(), "unknown field");
    }
  }

  const std::string& path() const { return path_; }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> used_;
};

std::string_view form_name(ContrastiveForm f) {
  return f == ContrastiveForm::kLiteral ? "literal" : "standard";
}

}  // namespace

ExperimentConfig config_from_json(const json& doc) {
  ExperimentConfig cfg;
  FieldReader root(doc, "");

  if (const json* city = root.child("city")) {
    FieldReader r(*city, "/city");
    std::string layout = std::string(to_string(cfg.city.layout));
    std::string mode = std::string(to_string(cfg.city.height_mode));
    r.read("layout", layout);
    r.read("height_mode", mode);
    try {
      cfg.city.layout = parse_layout(layout);
      cfg.city.height_mode = parse_height_mode(mode);
    } catch (const ParameterError& e) {
      throw ParseError("/city/" + e.field(), e.what());
    }
    r.read_optional_string("import_path", cfg.city.import_path);
    if (const json* grid = r.child("grid")) {
      FieldReader g(*grid, "/city/grid");
      g.read("blocks_per_side", cfg.city.grid.blocks_per_side);
      g.read("block_pitch", cfg.city.grid.block_pitch);
      g.read("building_inset", cfg.city.grid.building_inset);
      g.finish();
    }
    if (const json* radial = r.child("radial")) {
      FieldReader g(*radial, "/city/radial");
      g.read("rings", cfg.city.radial.rings);
      g.read("ring_spacing", cfg.city.radial.ring_spacing);
      g.read("avenues", cfg.city.radial.avenues);
      g.read("building_inset", cfg.city.radial.building_inset);
      g.finish();
    }
    if (const json* heights = r.child("heights")) {
      FieldReader h(*heights, "/city/heights");
      h.read("h_uniform", cfg.city.heights.h_uniform);
      h.read("h_min", cfg.city.heights.h_min);
      h.read("h_max", cfg.city.heights.h_max);
      h.finish();
    }
    r.finish();
  }

  if (const json* p = root.child("perception")) {
    FieldReader r(*p, "/perception");
    r.read("n_rays", cfg.perception.n_rays);
    r.read("max_distance", cfg.perception.max_distance);
    r.read("eye_height", cfg.perception.eye_height);
    r.read("grid_step", cfg.grid_step);
    r.finish();
  }

  if (const json* t = root.child("trajectories")) {
    FieldReader r(*t, "/trajectories");
    r.read("K", cfg.trajectories.K);
    r.read("N_k", cfg.trajectories.N_k);
    r.read("L", cfg.trajectories.L);
    r.read("train_fraction", cfg.trajectories.train_fraction);
    r.finish();
  }

  if (const json* e = root.child("encoder")) {
    FieldReader r(*e, "/encoder");
    r.read("lstm_hidden", cfg.encoder.lstm_hidden);
    cfg.encoder.origin_embed_dim = 2 * cfg.encoder.lstm_hidden;
    r.read("origin_embed_dim", cfg.encoder.origin_embed_dim);
    r.read("latent_dim", cfg.encoder.latent_dim);
    r.read("shared_dim", cfg.encoder.shared_dim);
    r.read("fusion_hidden", cfg.encoder.fusion_hidden);
    r.read("decoder_hidden", cfg.encoder.decoder_hidden);
    r.finish();
  }

  if (const json* t = root.child("train")) {
    FieldReader r(*t, "/train");
    auto& tc = cfg.train;
    r.read("epochs", tc.epochs);
    r.read("batch_size", tc.batch_size);
    r.read("learning_rate", tc.learning_rate);
    r.read("margin", tc.margin);
    r.read("lambda_recon", tc.lambda_recon);
    r.read("lambda_contrast", tc.lambda_contrast);
    r.read("lambda_shared", tc.lambda_shared);
    r.read("lambda_ortho", tc.lambda_ortho);
    r.read("clip_norm", tc.clip_norm);
    r.read("early_stop_patience", tc.early_stop_patience);
    r.read("beta1", tc.beta1);
    r.read("beta2", tc.beta2);
    r.read("epsilon", tc.epsilon);
    std::string form{form_name(tc.contrastive_form)};
    r.read("contrastive_form", form);
    if (form == "standard") {
      tc.contrastive_form = ContrastiveForm::kStandard;
    } else if (form == "literal") {
      tc.contrastive_form = ContrastiveForm::kLiteral;
    } else {
      throw ParseError("/train/contrastive_form", "expected \"standard\" or \"literal\"");
    }
    r.finish();
  }

  std::string out_dir = cfg.output_dir.string();
  root.read("output_dir", out_dir);
  cfg.output_dir = out_dir;
  root.read("seed", cfg.seed);
  root.read_optional_string("dataset_path", cfg.dataset_path);
  root.read_optional_string("checkpoint_path", cfg.checkpoint_path);
  root.read_optional_string("resume_from", cfg.resume_from);
  root.finish();
  return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
  auto opt = [](const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); };
  const auto& tc = cfg.train;
  return {
      {"city",
       {{"layout", to_string(cfg.city.layout)},
        {"height_mode", to_string(cfg.city.height_mode)},
        {"import_path", opt(cfg.city.import_path)},
        {"grid",
         {{"blocks_per_side", cfg.city.grid.blocks_per_side},
          {"block_pitch", cfg.city.grid.block_pitch},
          {"building_inset", cfg.city.grid.building_inset}}},
        {"radial",
         {{"rings", cfg.city.radial.rings},
          {"ring_spacing", cfg.city.radial.ring_spacing},
          {"avenues", cfg.city.radial.avenues},
          {"building_inset", cfg.city.radial.building_inset}}},
        {"heights",
         {{"h_uniform", cfg.city.heights.h_uniform},
          {"h_min", cfg.city.heights.h_min},
          {"h_max", cfg.city.heights.h_max}}}}},
      {"perception",
       {{"n_rays", cfg.perception.n_rays},
        {"max_distance", cfg.perception.max_distance},
        {"eye_height", cfg.perception.eye_height},
        {"grid_step", cfg.grid_step}}},
      {"trajectories",
       {{"K", cfg.trajectories.K},
        {"N_k", cfg.trajectories.N_k},
        {"L", cfg.trajectories.L},
        {"train_fraction", cfg.trajectories.train_fraction}}},
      {"encoder",
       {{"lstm_hidden", cfg.encoder.lstm_hidden},
        {"origin_embed_dim", cfg.encoder.origin_embed_dim},
        {"latent_dim", cfg.encoder.latent_dim},
        {"shared_dim", cfg.encoder.shared_dim},
        {"fusion_hidden", cfg.encoder.fusion_hidden},
        {"decoder_hidden", cfg.encoder.decoder_hidden}}},
      {"train",
       {{"epochs", tc.epochs},
        {"batch_size", tc.batch_size},
        {"learning_rate", tc.learning_rate},
        {"margin", tc.margin},
        {"lambda_recon", tc.lambda_recon},
        {"lambda_contrast", tc.lambda_contrast},
        {"lambda_shared", tc.lambda_shared},
        {"lambda_ortho", tc.lambda_ortho},
        {"clip_norm", tc.clip_norm},
        {"early_stop_patience", tc.early_stop_patience},
        {"beta1", tc.beta1},
        {"beta2", tc.beta2},
        {"epsilon", tc.epsilon},
        {"contrastive_form", form_name(tc.contrastive_form)}}},
      {"output_dir", cfg.output_dir.string()},
      {"seed", cfg.seed},
      {"dataset_path", opt(cfg.dataset_path)},
      {"checkpoint_path", opt(cfg.checkpoint_path)},
      {"resume_from", opt(cfg.resume_from)},
  };
}

std::uint64_t stage_seed(const ExperimentConfig& cfg, const std::string& tag) {
  return derive_seed(cfg.seed, tag);
}

ExperimentConfig finalize(ExperimentConfig cfg) {
  cfg.city.grid.heights = cfg.city.heights;
  cfg.city.radial.heights = cfg.city.heights;
  if (!cfg.city.import_path) {
    if (cfg.city.layout == Layout::kImported) {
      throw ParameterError("city.import_path", "required when layout is 'imported'");
    }
    if (cfg.city.height_mode == HeightMode::kImported) {
      throw ParameterError("city.height_mode", "'imported' requires city.import_path");
    }
    if (cfg.city.layout == Layout::kGrid) validate(cfg.city.grid);
    if (cfg.city.layout == Layout::kRadial) validate(cfg.city.radial);
  }
  validate(cfg.perception);
  if (!(cfg.grid_step > 0.0)) throw ParameterError("perception.grid_step", "must be > 0");
  if (cfg.trajectories.K < 2) throw ParameterError("trajectories.K", "must be >= 2");
  cfg.encoder.seq_len = cfg.trajectories.L + 1;
  cfg.encoder.n_origins = cfg.trajectories.K;
  cfg.encoder.input_dim = 2;
  validate(cfg.encoder);
  cfg.train.seed = stage_seed(cfg, "train");
  validate(cfg.train);
  DatasetConfig dc;
  dc.per_origin = cfg.trajectories.N_k;
  dc.steps = cfg.trajectories.L;
  dc.train_fraction = cfg.trajectories.train_fraction;
  dc.perception = cfg.perception;
  validate(dc);
  return cfg;
}

std::string config_digest(const ExperimentConfig& cfg) {
  json j = config_to_json(cfg);
  j.erase("output_dir");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
  return buf;
}

std::string read_text(const fs::path& path, const std::string& what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + what + " file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write file: " + path.string());
  out << text;
}

namespace {

json parse_json_file(const fs::path& path, const std::string& what) {
  const auto text = read_text(path, what);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string(), e.what());
  }
}

fs::path dataset_file(const ExperimentConfig& cfg) {
  return cfg.dataset_path ? fs::path(*cfg.dataset_path) : cfg.output_dir / "dataset.jsonl";
}

fs::path checkpoint_file(const ExperimentConfig& cfg) {
  return cfg.checkpoint_path ? fs::path(*cfg.checkpoint_path) : cfg.output_dir / "checkpoint.json";
}

std::string city_name(const City& city) {
  return std::string(to_string(city.meta.layout)) + "-" + std::string(to_string(city.meta.height_mode));
}

std::string exposure_csv(const ExposureMap& map) {
  std::ostringstream out;
  out.precision(17);
  out << "x,y,visibility\n";
  for (int iy = 0; iy < map.ny; ++iy) {
    for (int ix = 0; ix < map.nx; ++ix) {
      const Vec2 c = map.cell_center(ix, iy);
      out << c.x << ',' << c.y << ',';
      if (const auto& v = map.at(ix, iy)) {
        out << *v;
      } else {
        out << "NA";
      }
      out << '\n';
    }
  }
  return out.str();
}

EncoderParams train_init(const ExperimentConfig& cfg) {
  if (cfg.resume_from) {
    auto params = checkpoint_from_json(parse_json_file(*cfg.resume_from, "checkpoint"));
    if (!(params.config() == cfg.encoder)) {
      throw ValidationError("checkpoint " + *cfg.resume_from + " does not match the encoder config");
    }
    return params;
  }
  return initial_params(cfg.encoder, cfg.train);
}

void write_training(const ExperimentConfig& cfg, const fs::path& dir, const TrainResult& res) {
  write_text(dir / "checkpoint.json", checkpoint_to_json(res.params).dump() + "\n");
  write_text(dir / "training_log.csv", training_log_csv(res.log));
  json summary = {{"stopping_epoch", res.log.stopping_epoch},
                  {"best_epoch", res.log.best_epoch},
                  {"best_val_total", res.log.best_val},
                  {"total_steps", res.log.total_steps},
                  {"normalized_recon_error", res.log.normalized_recon_error},
                  {"config_digest", config_digest(cfg)}};
  write_text(dir / "training_summary.json", summary.dump(2) + "\n");
}

void write_analysis(const City& city, const ExperimentConfig& cfg, const fs::path& dir,
                    const AsymmetryReport& report) {
  write_text(dir / "report.json", report_to_json(report).dump(2) + "\n");
  write_text(dir / "projection.csv", projection_csv(report));
  write_text(dir / "distance_matrix.svg", svg::distance_heatmap(report.distances));
  write_text(dir / "embedding_scatter.svg", svg::embedding_scatter(report.projection, report.projection_origin));
  const auto map = exposure_map(city, cfg.perception, cfg.grid_step);
  write_text(dir / "exposure_map.csv", exposure_csv(map));
  write_text(dir / "exposure_map.svg", svg::exposure_heatmap(map));
}

}  // namespace

City build_city(const ExperimentConfig& cfg) {
  if (cfg.city.import_path) {
    return import_city(parse_json_file(*cfg.city.import_path, "city"));
  }
  City city = cfg.city.layout == Layout::kGrid
                  ? generate_grid_city(cfg.city.grid, stage_seed(cfg, "city"))
                  : generate_radial_city(cfg.city.radial, stage_seed(cfg, "city"));
  return assign_heights(std::move(city), cfg.city.height_mode, cfg.city.heights,
                        stage_seed(cfg, "heights"));
}

Dataset build_experiment_dataset(const ExperimentConfig& cfg, const City& city) {
  const auto origins = select_origins(city.network, cfg.trajectories.K, stage_seed(cfg, "origins"));
  DatasetConfig dc;
  dc.per_origin = cfg.trajectories.N_k;
  dc.steps = cfg.trajectories.L;
  dc.train_fraction = cfg.trajectories.train_fraction;
  dc.perception = cfg.perception;
  dc.seed = stage_seed(cfg, "dataset");
  return build_dataset(city, origins, dc);
}

City cmd_citygen(const ExperimentConfig& cfg) {
  City city = build_city(cfg);
  write_text(cfg.output_dir / "city.json", export_city(city).dump(2) + "\n");
  return city;
}

Dataset cmd_featurize(const ExperimentConfig& cfg) {
  const City city = build_city(cfg);
  Dataset ds = build_experiment_dataset(cfg, city);
  write_text(dataset_file(cfg), serialize_dataset(ds));
  return ds;
}

TrainResult cmd_train(const ExperimentConfig& cfg) {
  const Dataset ds = parse_dataset(read_text(dataset_file(cfg), "dataset"));
  auto res = train(ds, train_init(cfg), cfg.train);
  write_training(cfg, cfg.output_dir, res);
  return res;
}

AsymmetryReport cmd_analyze(const ExperimentConfig& cfg) {
  const Dataset ds = parse_dataset(read_text(dataset_file(cfg), "dataset"));
  const auto params = checkpoint_from_json(parse_json_file(checkpoint_file(cfg), "checkpoint"));
  if (params.config().n_origins != ds.n_origins()) {
    throw ValidationError("checkpoint and dataset disagree on the number of origins");
  }
  const City city = build_city(cfg);
  auto report = analyze(params, ds, {city_name(city), cfg.seed, config_digest(cfg)});
  write_analysis(city, cfg, cfg.output_dir, report);
  return report;
}

CityResult run_city(const ExperimentConfig& cfg, const fs::path& dir) {
  const City city = build_city(cfg);
  write_text(dir / "city.json", export_city(city).dump(2) + "\n");
  const Dataset ds = build_experiment_dataset(cfg, city);
  write_text(dir / "dataset.jsonl", serialize_dataset(ds));

  const EncoderParams init = train_init(cfg);
  CityResult result;
  result.layout = city.meta.layout;
  result.height_mode = city.meta.height_mode;
  result.seed = cfg.seed;
  result.shared_dispersion_init = shared_dispersion(init, ds);
  auto trained = train(ds, init, cfg.train);
  write_training(cfg, dir, trained);
  result.log = trained.log;
  result.normalized_recon_error = trained.log.normalized_recon_error;
  result.separability = nearest_centroid_accuracy(trained.params, ds);
  result.shared_dispersion_final = shared_dispersion(trained.params, ds);
  result.report = analyze(trained.params, ds, {city_name(city), cfg.seed, config_digest(cfg)});
  write_analysis(city, cfg, dir, result.report);
  return result;
}

double relative_spread(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (!(*lo > 0.0)) throw DomainError("relative_spread: minimum must be positive");
  return (*hi - *lo) / *lo;
}

ExperimentReport cmd_pipeline(const ExperimentConfig& base) {
  ExperimentReport report;
  std::vector<double> grid_d, radial_d;
  for (Layout layout : {Layout::kGrid, Layout::kRadial}) {
    for (HeightMode mode : {HeightMode::kUniform, HeightMode::kGradient, HeightMode::kRandom}) {
      ExperimentConfig cfg = base;
      cfg.city.layout = layout;
      cfg.city.height_mode = mode;
      cfg.city.import_path.reset();
      cfg.resume_from.reset();
      const std::string tag = std::string(to_string(layout)) + "_" + std::string(to_string(mode));
      cfg.seed = derive_seed(base.seed, "city/" + tag);
      cfg.output_dir = base.output_dir / tag;
      cfg = finalize(cfg);
      auto res = run_city(cfg, cfg.output_dir);
      (layout == Layout::kGrid ? grid_d : radial_d).push_back(res.report.origin_divergence);
      report.cities.push_back(std::move(res));
    }
  }
  report.grid_spread = relative_spread(grid_d);
  report.radial_spread = relative_spread(radial_d);
  write_text(base.output_dir / "pipeline_report.json", experiment_report_to_json(report).dump(2) + "\n");
  write_text(base.output_dir / "asymmetry_table.csv", experiment_table_csv(report));
  return report;
}

json experiment_report_to_json(const ExperimentReport& report) {
  json cities = json::array();
  for (const auto& c : report.cities) {
    cities.push_back({{"layout", to_string(c.layout)},
                      {"height_mode", to_string(c.height_mode)},
                      {"seed", c.seed},
                      {"origin_divergence", c.report.origin_divergence},
                      {"origin_divergence_across_origins", c.report.origin_divergence_across},
                      {"global_asymmetry", c.report.global_asymmetry},
                      {"normalized_recon_error", c.normalized_recon_error},
                      {"stopping_epoch", c.log.stopping_epoch},
                      {"best_epoch", c.log.best_epoch},
                      {"origin_separability", c.separability},
                      {"shared_dispersion_init", c.shared_dispersion_init},
                      {"shared_dispersion_final", c.shared_dispersion_final},
                      {"distance_matrix", c.report.distances.data}});
  }
  return {{"cities", cities},
          {"spread", {{"grid", report.grid_spread}, {"radial", report.radial_spread}}}};
}

std::string experiment_table_csv(const ExperimentReport& report) {
  std::ostringstream out;
  out.precision(17);
  out << "layout,height_mode,origin_divergence,global_asymmetry,normalized_recon_error\n";
  for (const auto& c : report.cities) {
    out << to_string(c.layout) << ',' << to_string(c.height_mode) << ',' << c.report.origin_divergence
        << ',' << c.report.global_asymmetry << ',' << c.normalized_recon_error << '\n';
  }
  return out.str();
}

}  // namespace asymcity
