#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <stdexcept>
#include <string>

#include "hai/bench.hpp"
#include "hai/dataset.hpp"
#include "hai/errors.hpp"
#include "hai/keyed_stream.hpp"
#include "hai/ml.hpp"
#include "hai/parallel.hpp"
#include "hai/security.hpp"
#include "hai/sketch.hpp"

namespace hai::cli {
namespace {

// Flag combinations that cannot be expressed in CLI11 constraints.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("write failed for " + path);
}

// HAI1 when the file starts with the magic, IDX otherwise.
IndexedDataset load_dataset(const std::string& path, const std::string& labels = {}) {
  const auto bytes = read_bytes(path);
  if (bytes.size() >= 4 && std::equal(bytes.begin(), bytes.begin() + 4, "HAI1")) {
    if (!labels.empty()) throw UsageError("--labels only applies to IDX input");
    return parse_hai1(bytes);
  }
  if (labels.empty()) return parse_idx(bytes);
  const auto lb = read_bytes(labels);
  return parse_idx(bytes, std::span<const std::uint8_t>(lb));
}

SecretKey load_key(const std::string& path, std::ostream& err) {
  auto loaded = read_key_file(path);
  for (const auto& w : loaded.warnings) err << "warning: " << w << "\n";
  return loaded.key;
}

Json partition_json(const Partition& p) {
  Json a = Json::array();
  for (const auto& [index, cluster] : p.entries()) a.push_back({index, cluster});
  return Json{{"report_version", 1}, {"k", p.k()}, {"assignments", a}};
}

Partition load_partition(const std::string& path) {
  const auto bytes = read_bytes(path);
  try {
    const auto j = Json::parse(bytes.begin(), bytes.end());
    std::vector<std::pair<std::uint32_t, std::uint32_t>> entries;
    for (const auto& e : j.at("assignments")) {
      entries.emplace_back(e.at(0).get<std::uint32_t>(), e.at(1).get<std::uint32_t>());
    }
    return Partition(std::move(entries), j.at("k").get<std::uint32_t>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed partition file " + path + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError("invalid partition file " + path + ": " + e.what());
  }
}

void emit(const Json& j, const std::string& path, std::ostream& out) {
  const std::string text = j.dump(2) + "\n";
  if (path.empty()) {
    out << text;
  } else {
    write_text(path, text);
  }
}

// Output width for a sketch: explicit --n-out, else the pinned Fashion-MNIST
// widths for 28x28 u8 input (256 at delta 3, 132 at delta 6), else the
// default floor(n_in / delta).
std::optional<std::uint32_t> choose_n_out(std::optional<std::uint32_t> n_out, Scheme scheme,
                                          const CompressionRate& delta, std::uint32_t n_in) {
  if (n_out) return n_out;
  if (scheme == Scheme::RealProjection && n_in == 784) {
    if (delta.text() == "3") return 256;
    if (delta.text() == "6") return 132;
  }
  return std::nullopt;
}

struct Common {
  unsigned threads = 0;
  unsigned resolved() const { return resolve_threads(threads); }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Keyed similarity-preserving sketches: protect datasets and compute on them", "hai"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--threads", common.threads, "Worker threads (default: HAI_THREADS, else 1)");

  // genkey
  std::string key_out;
  bool force = false;
  auto* genkey = app.add_subcommand("genkey", "Write a fresh 256-bit key file");
  genkey->add_option("--out", key_out, "Key file")->required();
  genkey->add_flag("--force", force, "Overwrite an existing file");

  // gen-synth
  SynthConfig synth;
  std::string train_out, val_out;
  auto* gen_synth = app.add_subcommand("gen-synth", "Generate synthetic binary records");
  gen_synth->add_option("--out-train", train_out)->required();
  gen_synth->add_option("--out-val", val_out)->required();
  gen_synth->add_option("--seed", synth.seed);
  gen_synth->add_option("--n-train", synth.n_train);
  gen_synth->add_option("--n-val", synth.n_val);
  gen_synth->add_option("--n-feat", synth.n_feat)->check(CLI::PositiveNumber);
  gen_synth->add_option("--classes", synth.classes);
  gen_synth->add_option("--p-base", synth.p_base);
  gen_synth->add_option("--p-flip", synth.p_flip);

  // gen-images
  ImageSynthConfig images;
  bool images_idx = false;
  auto* gen_images = app.add_subcommand("gen-images", "Generate synthetic 28x28 greyscale images");
  gen_images->add_option("--out-train", train_out)->required();
  gen_images->add_option("--out-val", val_out)->required();
  gen_images->add_option("--seed", images.seed);
  gen_images->add_option("--n-train", images.n_train);
  gen_images->add_option("--n-val", images.n_val);
  gen_images->add_option("--classes", images.classes);
  gen_images->add_flag("--idx", images_idx, "Write IDX image files plus <out>.labels instead of HAI1");

  // ingest-idx
  std::string in_path, labels_path, out_path;
  auto* ingest = app.add_subcommand("ingest-idx", "Convert IDX images (and labels) to HAI1");
  ingest->add_option("--images", in_path)->required();
  ingest->add_option("--labels", labels_path);
  ingest->add_option("--out", out_path)->required();

  // protect
  std::string key_path, delta_text = "3", scheme_text = "binary-sample";
  std::optional<std::uint32_t> n_out;
  std::uint32_t quant_bits = 8;
  bool permute = false, strip_labels = false;
  auto* protect = app.add_subcommand("protect", "Sketch a dataset under a key");
  protect->add_option("--key", key_path)->required();
  protect->add_option("--delta", delta_text);
  protect->add_option("--scheme", scheme_text);
  protect->add_option("--in", in_path)->required();
  protect->add_option("--labels", labels_path, "IDX labels for IDX input");
  protect->add_option("--out", out_path)->required();
  protect->add_option("--n-out", n_out);
  protect->add_option("--quant-bits", quant_bits);
  protect->add_flag("--permute-classes", permute);
  protect->add_flag("--strip-labels", strip_labels);

  // cluster
  KModesConfig kcfg;
  std::string plain_path;
  auto* cluster = app.add_subcommand("cluster", "k-modes over a bit dataset; writes a partition file");
  cluster->add_option("--in", in_path)->required();
  cluster->add_option("--out", out_path);
  cluster->add_option("--k", kcfg.k);
  cluster->add_option("--iterations", kcfg.iterations);
  cluster->add_option("--seed", kcfg.seed);
  cluster->add_option("--key", key_path, "Owner key: transpose the result to plaintext indexes");
  cluster->add_option("--plain", plain_path, "Plaintext dataset the protected input came from");
  cluster->add_flag("--permute-classes", permute);

  // classify
  std::string train_path, query_path, measure_text = "hamming";
  std::uint32_t knn_k = 5;
  auto* classify = app.add_subcommand("classify", "k-NN labels for query records");
  classify->add_option("--train", train_path)->required();
  classify->add_option("--query", query_path)->required();
  classify->add_option("--k", knn_k);
  classify->add_option("--measure", measure_text);
  classify->add_option("--out", out_path);
  classify->add_option("--key", key_path, "Owner key: report predictions under plaintext indexes");
  classify->add_option("--plain", plain_path, "Plaintext query dataset the protected queries came from");
  classify->add_flag("--permute-classes", permute);

  // rand-index
  std::string part_a, part_b;
  auto* rand_cmd = app.add_subcommand("rand-index", "Rand index of two partition files");
  rand_cmd->add_option("a", part_a)->required();
  rand_cmd->add_option("b", part_b)->required();

  // bench
  BenchConfig bcfg;
  std::string val_path;
  bool check = false, no_permute = false;
  auto* bench = app.add_subcommand("bench", "Plaintext vs protected k-modes and k-NN");
  bench->add_option("--train", train_path)->required();
  bench->add_option("--val", val_path)->required();
  bench->add_option("--key", key_path)->required();
  bench->add_option("--delta", delta_text);
  bench->add_option("--n-out", n_out);
  bench->add_option("--k", bcfg.kmodes.k);
  bench->add_option("--iterations", bcfg.kmodes.iterations);
  bench->add_option("--seed", bcfg.kmodes.seed);
  bench->add_option("--knn-k", bcfg.knn_k);
  bench->add_option("--runs", bcfg.runs)->check(CLI::PositiveNumber);
  bench->add_option("--out", out_path);
  bench->add_flag("--check", check, "Exit 4 unless the acceptance thresholds hold");
  bench->add_flag("--no-permute", no_permute, "Publish protected records under their plaintext indexes");

  // attack
  auto* attack = app.add_subcommand("attack", "Attack harnesses");
  attack->require_subcommand(1);
  std::uint64_t seed = 1;
  std::uint32_t n_in = 16, targets = 16, candidate_keys = 100, key_pairs = 100, trials = 200, limit = 100;
  bool with_key = false;
  std::optional<std::uint32_t> budget;
  std::string score_text = "correlation", assign_text = "greedy", protected_path, probes_path, a_path, b_path;

  auto* preimage = attack->add_subcommand("preimage", "Exhaustive preimage search on a toy binary sketch");
  preimage->add_option("--n-in", n_in)->check(CLI::Range(8, 24));
  preimage->add_option("--delta", delta_text);
  preimage->add_option("--n-out", n_out);
  preimage->add_option("--key", key_path, "Owner key (default: derived from --seed)");
  preimage->add_flag("--with-key", with_key, "Attacker holds the key");
  preimage->add_option("--targets", targets);
  preimage->add_option("--candidate-keys", candidate_keys);
  preimage->add_option("--seed", seed);
  preimage->add_option("--out", out_path);

  auto* linkage = attack->add_subcommand("linkage", "Re-identify protected records from plaintext");
  linkage->add_option("--plain", plain_path)->required();
  linkage->add_option("--protected", protected_path)->required();
  linkage->add_option("--key", key_path, "Owner key, used only to score the attack")->required();
  linkage->add_flag("--permute-classes", permute);
  linkage->add_option("--score", score_text)->check(CLI::IsMember({"correlation", "distance"}));
  linkage->add_option("--assignment", assign_text)->check(CLI::IsMember({"greedy", "hungarian"}));
  linkage->add_option("--out", out_path);

  auto* avalanche = attack->add_subcommand("avalanche", "Sketch agreement across independent keys");
  avalanche->add_option("--in", in_path)->required();
  avalanche->add_option("--scheme", scheme_text);
  avalanche->add_option("--delta", delta_text);
  avalanche->add_option("--n-out", n_out);
  avalanche->add_option("--key-pairs", key_pairs);
  avalanche->add_option("--limit", limit, "Records taken from the input");
  avalanche->add_option("--seed", seed);
  avalanche->add_option("--out", out_path);

  auto* malleability = attack->add_subcommand("malleability", "Forge admissible sketches by bit flips");
  malleability->add_option("--model-data", in_path)->required();
  malleability->add_option("--probes", probes_path);
  malleability->add_option("--k", kcfg.k);
  malleability->add_option("--iterations", kcfg.iterations);
  malleability->add_option("--budget", budget);
  malleability->add_option("--trials", trials);
  malleability->add_option("--seed", seed);
  malleability->add_option("--out", out_path);

  auto* extraction = attack->add_subcommand("extraction", "Model consistency across two protected samples");
  extraction->add_option("--a", a_path)->required();
  extraction->add_option("--b", b_path)->required();
  extraction->add_option("--k", kcfg.k);
  extraction->add_option("--iterations", kcfg.iterations);
  extraction->add_option("--seed", kcfg.seed);
  extraction->add_option("--out", out_path);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    const unsigned threads = common.resolved();

    if (*genkey) {
      write_key_file(key_out, SecretKey::generate(), force);
      out << "wrote " << key_out << "\n";
    } else if (*gen_synth) {
      const auto [train, val] = gen_synthetic_cyber(synth);
      write_hai1(train, train_out);
      write_hai1(val, val_out);
      out << "wrote " << train.size() << " + " << val.size() << " records of " << synth.n_feat << " bits\n";
    } else if (*gen_images) {
      const auto [train, val] = gen_synthetic_images(images);
      if (images_idx) {
        write_idx(train, train_out, train_out + ".labels");
        write_idx(val, val_out, val_out + ".labels");
      } else {
        write_hai1(train, train_out);
        write_hai1(val, val_out);
      }
      out << "wrote " << train.size() << " + " << val.size() << " images\n";
    } else if (*ingest) {
      const auto ds = load_dataset(in_path, labels_path);
      write_hai1(ds, out_path);
      out << "wrote " << ds.size() << " records of " << ds.meta.n_in << " elements\n";
    } else if (*protect) {
      const auto key = load_key(key_path, err);
      const auto ds = load_dataset(in_path, labels_path);
      const auto scheme = parse_scheme(scheme_text);
      const auto delta = CompressionRate::parse(delta_text);
      const auto params =
          SketchParams::make(scheme, delta, ds.meta.n_in, choose_n_out(n_out, scheme, delta, ds.meta.n_in), quant_bits);
      const auto protected_set = protect_dataset(ds, Sketcher(key, params), permute, key, threads);
      const Hai1WriteOptions wopts{strip_labels};
      const auto plain_size = serialize_hai1(ds).size();
      const auto bytes = serialize_hai1(protected_set, wopts);
      write_text(out_path, std::string(bytes.begin(), bytes.end()));
      out << "records " << protected_set.size() << ", " << params.output_bytes() << " bytes each\n";
      out << "size ratio " << static_cast<double>(plain_size) / static_cast<double>(bytes.size()) << "\n";
    } else if (*cluster) {
      const auto ds = load_dataset(in_path);
      kcfg.threads = threads;
      const auto result = kmodes(ds.bit_rows(), ds.indexes(), kcfg);
      Partition p = result.partition;
      if (!key_path.empty() || !plain_path.empty()) {
        if (key_path.empty() || plain_path.empty()) throw UsageError("--key and --plain go together");
        const auto key = load_key(key_path, err);
        p = transpose_partition(p, derive_transposition(key, load_dataset(plain_path), permute));
      }
      Json j = partition_json(p);
      j["iterations_run"] = result.iterations_run;
      j["converged"] = result.converged;
      j["objective_trace"] = result.objective_trace;
      emit(j, out_path, out);
    } else if (*classify) {
      const auto train = load_dataset(train_path);
      const auto query = load_dataset(query_path);
      if (train.meta.payload_kind() != query.meta.payload_kind() || train.meta.scheme != query.meta.scheme) {
        throw std::invalid_argument("train and query datasets differ in scheme");
      }
      const auto pred = knn_batch(train.bit_rows(), train.labels(), query.bit_rows(), knn_k,
                                  parse_measure(measure_text), threads);
      std::vector<std::uint32_t> idx = query.indexes();
      if (!key_path.empty() || !plain_path.empty()) {
        if (key_path.empty() || plain_path.empty()) throw UsageError("--key and --plain go together");
        const auto key = load_key(key_path, err);
        const auto map = derive_transposition(key, load_dataset(plain_path), permute);
        for (auto& i : idx) {
          const auto plain = map.to_plain(i);
          if (!plain) throw std::invalid_argument("query index " + std::to_string(i) + " not in the plaintext set");
          i = *plain;
        }
      }
      std::vector<std::pair<std::uint32_t, std::uint32_t>> rows;
      for (std::size_t i = 0; i < idx.size(); ++i) rows.emplace_back(idx[i], pred[i]);
      std::sort(rows.begin(), rows.end());
      Json a = Json::array();
      for (const auto& [i, label] : rows) a.push_back({i, label});
      emit(Json{{"report_version", 1}, {"k", knn_k}, {"measure", measure_text}, {"predictions", a}}, out_path, out);
    } else if (*rand_cmd) {
      out << rand_index(load_partition(part_a), load_partition(part_b)) << "\n";
    } else if (*bench) {
      const auto key = load_key(key_path, err);
      const auto train = load_dataset(train_path);
      const auto val = load_dataset(val_path);
      bcfg.train_id = std::filesystem::path(train_path).filename().string();
      bcfg.val_id = std::filesystem::path(val_path).filename().string();
      bcfg.delta = CompressionRate::parse(delta_text);
      bcfg.n_out = n_out;
      bcfg.permute_classes = !no_permute;
      bcfg.threads = threads;
      bcfg.kmodes.stop_when_stable = false;
      const auto report = run_bench(train, val, key, bcfg);
      if (!out_path.empty()) write_text(out_path, report.to_json().dump(2) + "\n");
      out << report.table();
      if (check) {
        bool ok = true;
        for (const auto& c : check_report(report)) {
          out << (c.passed ? "PASS " : "FAIL ") << c.name << " " << c.detail << "\n";
          ok = ok && c.passed;
        }
        if (!ok) return kCheckFailed;
      }
    } else if (*preimage) {
      const auto delta = CompressionRate::parse(delta_text);
      const auto params = SketchParams::make(Scheme::BinarySample, delta, n_in, n_out);
      const auto key = key_path.empty() ? SecretKey::from_seed(seed) : load_key(key_path, err);
      PreimageOptions opts;
      opts.targets = targets;
      opts.candidate_keys = candidate_keys;
      opts.with_key = with_key;
      opts.seed = seed;
      opts.threads = threads;
      emit(preimage_bruteforce(params, key, opts).to_json(), out_path, out);
    } else if (*linkage) {
      const auto key = load_key(key_path, err);
      const auto plain = load_dataset(plain_path);
      LinkageOptions opts;
      opts.score = score_text == "distance" ? ProfileScore::Distance : ProfileScore::Correlation;
      opts.assignment = assign_text == "hungarian" ? Assignment::Hungarian : Assignment::Greedy;
      opts.threads = threads;
      const auto truth = derive_transposition(key, plain, permute);
      emit(linkage_attack(plain, load_dataset(protected_path), truth, opts).to_json(), out_path, out);
    } else if (*avalanche) {
      auto sample = load_dataset(in_path);
      if (sample.records.size() > limit) sample.records.resize(limit);
      const auto scheme = parse_scheme(scheme_text);
      const auto delta = CompressionRate::parse(delta_text);
      const auto params =
          SketchParams::make(scheme, delta, sample.meta.n_in, choose_n_out(n_out, scheme, delta, sample.meta.n_in));
      AvalancheOptions opts;
      opts.key_pairs = key_pairs;
      opts.seed = seed;
      opts.threads = threads;
      emit(key_avalanche(params, sample, opts).to_json(), out_path, out);
    } else if (*malleability) {
      const auto model_data = load_dataset(in_path);
      kcfg.seed = seed;
      kcfg.threads = threads;
      const auto model = kmodes(model_data.bit_rows(), model_data.indexes(), kcfg);
      MalleabilityOptions opts;
      opts.trials = trials;
      opts.budget = budget;
      opts.seed = seed;
      const auto probes = probes_path.empty() ? model_data : load_dataset(probes_path);
      emit(malleability_probe(model_data, model.centers, probes, opts).to_json(), out_path, out);
    } else if (*extraction) {
      kcfg.threads = threads;
      emit(model_extraction_check(load_dataset(a_path), load_dataset(b_path), kcfg).to_json(), out_path, out);
    }
    return kOk;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
}

}  // namespace hai::cli
