// csi_sentry: capture, ingest, analysis and classification front end.
//
// Exit codes: 0 success, 1 usage error (usage on stderr), 2 runtime failure.

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "csi_sentry/csi_sentry.hpp"

namespace cs = csi_sentry;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::uint64_t seed = 1;
  std::string host = "127.0.0.1";
  std::uint16_t port = cs::transport::kDefaultPort;
  double rate = 100.0;
  double duration = 60.0;
  double noise = 1.0;
  std::vector<std::string> events;
  std::string out;
  std::string store;
  std::string labels;
  std::string capture;
  std::string library;
  std::string model_path;
  std::string data;
  std::string har_out;
  std::size_t har_count = 50;
  std::size_t max_packets = 0;
  std::size_t queue = 256;
  bool once = false;
  std::size_t segment_len = 64;
  std::size_t stride = 32;
  std::size_t k = 8;
  double threshold_c = 3.0;
  std::string model = "tree";
  std::size_t epochs = 120;
  double lr = 1e-3;
  std::size_t hidden = 32;
  std::size_t max_depth = 0;
};

// "start:end" or "start:end:depth:doppler_hz", seconds and Hz.
cs::synth::MotionEvent parse_event(const std::string& spec) {
  std::vector<double> parts;
  std::size_t pos = 0;
  while (pos <= spec.size()) {
    const std::size_t colon = std::min(spec.find(':', pos), spec.size());
    const std::string field = spec.substr(pos, colon - pos);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(field, &used);
    } catch (const std::exception&) {
      used = std::string::npos;
    }
    if (used != field.size() || field.empty()) throw UsageError("bad --event '" + spec + "'");
    parts.push_back(v);
    pos = colon + 1;
  }
  if (parts.size() != 2 && parts.size() != 4) throw UsageError("--event takes start:end[:depth:doppler]");
  cs::synth::MotionEvent e;
  e.t_start = parts[0];
  e.t_end = parts[1];
  if (parts.size() == 4) {
    e.depth = parts[2];
    e.doppler_hz = parts[3];
  }
  return e;
}

// Inserts key=value lines of a --config file as --key=value right after the
// subcommand name, so explicit flags (parsed later, last one wins) override them.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::optional<std::string> path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config needs a path");
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (!path) return args;
  std::ifstream in(*path);
  if (!in) throw cs::Error(cs::Errc::IoFailure, "cannot read config " + *path);
  std::vector<std::string> injected;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(*path + ":" + std::to_string(line_no) + ": expected key=value");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw UsageError(*path + ":" + std::to_string(line_no) + ": empty key");
    if (value == "true") {
      injected.push_back("--" + key);
    } else if (value != "false") {
      injected.push_back("--" + key + "=" + value);
    }
  }
  const std::size_t at = args.empty() ? 0 : 1;
  args.insert(args.begin() + static_cast<std::ptrdiff_t>(at), injected.begin(), injected.end());
  return args;
}

std::vector<cs::classify::ActivitySample> har_data(const Options& o, std::uint64_t seed) {
  if (!o.data.empty()) return cs::classify::load_dataset(o.data);
  cs::synth::ActivitySynthConfig cfg;
  cfg.per_class = o.har_count;
  cfg.seed = seed;
  return cs::synth::gen_activity_dataset(cfg);
}

std::vector<double> amplitude_series(const cs::store::RecordLog& log) {
  std::vector<double> out;
  out.reserve(log.size());
  for (const auto& r : log.rows()) out.push_back(r.amplitude_db);
  return out;
}

cs::anomaly::SegmentConfig segment_config(const Options& o) {
  cs::anomaly::SegmentConfig cfg;
  cfg.segment_len = o.segment_len;
  cfg.stride = o.stride;
  cfg.k = o.k;
  cfg.seed = o.seed;
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------

int cmd_synth(const Options& o) {
  cs::synth::ChannelConfig cfg;
  cfg.rate_hz = o.rate;
  cfg.noise_sigma = o.noise;
  cfg.seed = o.seed;
  std::vector<cs::synth::MotionEvent> events;
  for (const auto& e : o.events) events.push_back(parse_event(e));
  const auto stream = cs::synth::gen_stream(cfg, o.duration, events);
  const auto packets = cs::synth::packets_of(stream);
  cs::transport::write_capture(o.out, packets);
  if (!o.labels.empty()) cs::synth::write_labels(o.labels, stream);
  std::cout << "wrote " << packets.size() << " packets to " << o.out << "\n";
  if (!o.har_out.empty()) {
    cs::synth::ActivitySynthConfig hc;
    hc.per_class = o.har_count;
    hc.seed = o.seed;
    const auto samples = cs::synth::gen_activity_dataset(hc);
    cs::classify::save_dataset(o.har_out, samples);
    std::cout << "wrote " << samples.size() << " activity windows to " << o.har_out << "\n";
  }
  return kExitOk;
}

std::atomic<cs::transport::IngestServer*> g_server{nullptr};

extern "C" void on_signal(int) {
  if (auto* s = g_server.load()) s->request_stop();
}

int cmd_serve(const Options& o) {
  cs::transport::IngestOptions opts;
  opts.queue_capacity = o.queue;
  opts.single_client = o.once;
  opts.max_packets = o.max_packets;
  cs::transport::IngestServer server({o.host, o.port}, opts);
  auto log = cs::store::RecordLog::open(o.store);
  cs::dsp::AmplitudeTracker tracker({}, log.last_packet_id().value_or(0));
  g_server.store(&server);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cerr << "listening on " << o.host << ":" << server.port() << "\n";
  const auto stats = server.run([&](cs::wire::CsiPacket&& p) { log.append(tracker.process(p)); });
  g_server.store(nullptr);
  std::cout << "received " << stats.received << " decoded " << stats.decoded << " decode_errors "
            << stats.decode_errors << " dropped " << stats.dropped << " stored " << log.size() << "\n";
  return kExitOk;
}

int cmd_ingest(const Options& o) {
  const auto packets = cs::transport::read_capture(o.capture);
  auto log = cs::store::RecordLog::open(o.store);
  cs::dsp::AmplitudeTracker tracker({}, log.last_packet_id().value_or(0));
  for (const auto& p : packets) log.append(tracker.process(p));
  std::cout << "ingested " << packets.size() << " packets into " << o.store << "\n";
  return kExitOk;
}

int cmd_replay(const Options& o) {
  const auto frames = cs::transport::read_capture_frames(o.capture);
  const std::size_t sent = cs::transport::stream_packets({o.host, o.port}, frames, o.rate);
  std::cout << "sent " << sent << " frames\n";
  return kExitOk;
}

int cmd_export_plot(const Options& o) {
  const auto log = cs::store::RecordLog::open_read_only(o.store);
  const std::size_t rows = cs::store::export_csv(log, o.out);
  std::cout << "exported " << rows << " rows to " << o.out << "\n";
  return kExitOk;
}

int cmd_anomaly_train(const Options& o) {
  const auto cfg = segment_config(o);
  const auto log = cs::store::RecordLog::open_read_only(o.store);
  cs::anomaly::KMeansTrace trace;
  const auto lib = cs::anomaly::fit_library(amplitude_series(log), cfg, &trace);
  cs::anomaly::save_library(lib, o.out);
  std::printf("library: k=%zu L=%zu iterations=%zu converged=%d error mean=%.6g std=%.6g\n", lib.centroids.size(),
              cfg.segment_len, trace.iterations, trace.converged ? 1 : 0, lib.error_mean, lib.error_std);
  return kExitOk;
}

int cmd_anomaly_detect(const Options& o) {
  const auto lib = cs::anomaly::load_library(o.library);
  const auto log = cs::store::RecordLog::open_read_only(o.store);
  const auto report = cs::anomaly::detect_anomalies(amplitude_series(log), lib, o.threshold_c);
  if (!o.out.empty()) cs::anomaly::write_report_csv(report, o.out);
  std::printf("threshold %.6g, %zu anomalous interval(s)\n", report.threshold, report.intervals.size());
  for (const auto& iv : report.intervals) {
    std::printf("  samples %zu..%zu  t=%.3f..%.3f s\n", iv.start, iv.end,
                static_cast<double>(log.rows()[iv.start].timestamp_us) * 1e-6,
                static_cast<double>(log.rows()[iv.end].timestamp_us) * 1e-6);
  }
  return kExitOk;
}

int cmd_har_train(const Options& o) {
  namespace cl = cs::classify;
  if (o.model == "lstm" && o.hidden == 0) throw UsageError("--hidden must be >= 1");
  const auto data = har_data(o, o.seed);
  if (data.empty()) throw cs::Error(cs::Errc::EmptyDataset, "no training data");
  if (o.model == "tree") {
    cl::TreeParams params;
    params.max_depth = o.max_depth;
    const auto m = cl::train_tree(cl::feature_examples(data), params);
    cl::save_tree(m, o.out);
    std::cout << "tree: " << m.nodes.size() << " nodes, depth " << m.depth() << "\n";
  } else if (o.model == "gnb") {
    cl::save_gnb(cl::train_gnb(cl::feature_examples(data)), o.out);
    std::cout << "gnb: trained on " << data.size() << " windows\n";
  } else {
    cl::LstmTrainOptions opt;
    opt.epochs = o.epochs;
    opt.lr = o.lr;
    const auto r = cl::lstm_train(data, cl::make_lstm(data.front().channels, o.hidden, 0.5, o.seed), opt);
    cl::save_lstm(r.model, o.out);
    std::printf("lstm: loss %.6g -> %.6g over %zu epochs\n", r.initial_loss,
                r.loss_curve.empty() ? r.initial_loss : r.loss_curve.back(), r.loss_curve.size());
  }
  std::cout << "saved " << o.out << "\n";
  return kExitOk;
}

int cmd_har_eval(const Options& o) {
  namespace cl = cs::classify;
  const std::string magic = cs::binary_io::file_magic(o.model_path);
  // Synthetic evaluation data uses the seed after the training one.
  const auto test = har_data(o, o.seed + 1);
  cl::Evaluation ev;
  if (magic == cl::kTreeMagic) {
    const auto m = cl::load_tree(o.model_path);
    ev = cl::evaluate([&](const cl::ActivitySample& s) { return cl::predict_tree(m, cl::dwt_features(s)).label; },
                      test);
  } else if (magic == cl::kGnbMagic) {
    const auto m = cl::load_gnb(o.model_path);
    ev = cl::evaluate([&](const cl::ActivitySample& s) { return cl::predict_gnb(m, cl::dwt_features(s)).label; },
                      test);
  } else if (magic == cl::kLstmMagic) {
    const auto m = cl::load_lstm(o.model_path);
    ev = cl::evaluate([&](const cl::ActivitySample& s) { return cl::lstm_classify(m, s); }, test);
  } else {
    throw cs::Error(cs::Errc::BadFormat, o.model_path + ": not a model file");
  }
  std::printf("accuracy %.4f on %zu windows\n", ev.accuracy, test.size());
  std::printf("%10s", "true\\pred");
  for (auto name : cl::kActivityNames) std::printf(" %9.*s", static_cast<int>(name.size()), name.data());
  std::printf("\n");
  for (std::size_t r = 0; r < cl::kNumClasses; ++r) {
    std::printf("%10.*s", static_cast<int>(cl::kActivityNames[r].size()), cl::kActivityNames[r].data());
    for (std::size_t c = 0; c < cl::kNumClasses; ++c) std::printf(" %9zu", ev.confusion[r][c]);
    std::printf("\n");
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CSI motion sensing: synthetic capture, TCP ingest, amplitude store, anomaly and activity models"};
  app.require_subcommand(1, 1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.footer("Any subcommand also accepts --config PATH: a key=value file whose keys are flag names.\n"
             "Explicit flags override values from the file.");

  Options o;
  try {
    o.port = cs::transport::default_port();
  } catch (const cs::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  auto seed = [&](CLI::App* s) { s->add_option("--seed", o.seed, "RNG seed")->capture_default_str(); };
  auto endpoint = [&](CLI::App* s) {
    s->add_option("--host", o.host, "IPv4 address or host name")->capture_default_str();
    s->add_option("--port", o.port, "TCP port (default 5501 or $CSI_SENTRY_PORT)")->capture_default_str();
  };
  auto positive = CLI::PositiveNumber;

  auto* synth = app.add_subcommand("synth", "Generate a framed packet capture from the synthetic channel");
  seed(synth);
  synth->add_option("--duration", o.duration, "Seconds of data")->check(CLI::NonNegativeNumber)->capture_default_str();
  synth->add_option("--rate", o.rate, "Packets per second")->check(positive)->capture_default_str();
  synth->add_option("--noise", o.noise, "Noise sigma per I/Q component")->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  synth->add_option("--event", o.events, "Motion event start:end[:depth:doppler_hz], repeatable")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  synth->add_option("--out", o.out, "Capture file to write")->required();
  synth->add_option("--labels", o.labels, "Also write a timestamp_us,in_motion sidecar");
  synth->add_option("--har-out", o.har_out, "Also write a labeled activity dataset");
  synth->add_option("--har-count", o.har_count, "Activity windows per class")->check(positive)->capture_default_str();

  auto* serve = app.add_subcommand("serve", "Accept framed packets over TCP and append them to a store");
  endpoint(serve);
  serve->add_option("--store", o.store, "Store log to append to")->required();
  serve->add_option("--max-packets", o.max_packets, "Stop after this many packets (0 = run until signalled)");
  serve->add_flag("--once", o.once, "Stop when the first client disconnects");
  serve->add_option("--queue", o.queue, "Queue capacity between reader and store")->check(positive)
      ->capture_default_str();

  auto* ingest = app.add_subcommand("ingest", "Append a capture file to a store without the network");
  ingest->add_option("capture", o.capture, "Framed capture file")->required();
  ingest->add_option("--store", o.store, "Store log to append to")->required();

  auto* replay = app.add_subcommand("replay", "Stream a capture file to a server at a fixed rate");
  endpoint(replay);
  replay->add_option("capture", o.capture, "Framed capture file")->required();
  replay->add_option("--rate", o.rate, "Frames per second (0 = as fast as possible)")->check(CLI::NonNegativeNumber)
      ->capture_default_str();

  auto* export_plot = app.add_subcommand("export-plot", "Export a store as plottable CSV");
  export_plot->add_option("--store", o.store, "Store log")->required();
  export_plot->add_option("--out", o.out, "CSV to write")->required();

  auto* atrain = app.add_subcommand("anomaly-train", "Fit a shape library to the amplitude series of a store");
  seed(atrain);
  atrain->add_option("--store", o.store, "Store log")->required();
  atrain->add_option("--out", o.out, "Library file to write")->required();
  atrain->add_option("--segment-len", o.segment_len, "Segment length L")->capture_default_str();
  atrain->add_option("--stride", o.stride, "Segment stride")->capture_default_str();
  atrain->add_option("--k", o.k, "Number of shapes")->capture_default_str();

  auto* adetect = app.add_subcommand("anomaly-detect", "Flag stretches a shape library cannot reconstruct");
  adetect->add_option("--store", o.store, "Store log")->required();
  adetect->add_option("--library", o.library, "Library file")->required();
  adetect->add_option("--threshold-c", o.threshold_c, "Threshold = mean + c * std")->capture_default_str();
  adetect->add_option("--out", o.out, "Per-sample error CSV to write");

  auto* htrain = app.add_subcommand("har-train", "Train an activity classifier");
  seed(htrain);
  htrain->add_option("--data", o.data, "Dataset file (default: synthetic set from --seed)");
  htrain->add_option("--har-count", o.har_count, "Synthetic windows per class")->check(positive)
      ->capture_default_str();
  htrain->add_option("--model", o.model, "Classifier")->check(CLI::IsMember({"tree", "gnb", "lstm"}))
      ->capture_default_str();
  htrain->add_option("--out", o.out, "Model file to write")->required();
  htrain->add_option("--epochs", o.epochs, "LSTM epochs")->capture_default_str();
  htrain->add_option("--lr", o.lr, "LSTM learning rate")->check(CLI::NonNegativeNumber)->capture_default_str();
  htrain->add_option("--hidden", o.hidden, "LSTM hidden units")->check(positive)->capture_default_str();
  htrain->add_option("--max-depth", o.max_depth, "Tree depth limit (0 = none)")->capture_default_str();

  auto* heval = app.add_subcommand("har-eval", "Evaluate a trained activity classifier");
  seed(heval);
  heval->add_option("--data", o.data, "Dataset file (default: synthetic set from --seed + 1)");
  heval->add_option("--har-count", o.har_count, "Synthetic windows per class")->check(positive)
      ->capture_default_str();
  heval->add_option("--model-path", o.model_path, "Model file (type read from its header)")->required();
  heval->add_option("--model", o.model, "Ignored; kept for symmetry with har-train")
      ->check(CLI::IsMember({"tree", "gnb", "lstm"}));

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    args = expand_config(std::move(args));
    std::reverse(args.begin(), args.end());  // CLI11 consumes from the back
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }

  try {
    if (*synth) return cmd_synth(o);
    if (*serve) return cmd_serve(o);
    if (*ingest) return cmd_ingest(o);
    if (*replay) return cmd_replay(o);
    if (*export_plot) return cmd_export_plot(o);
    if (*atrain) return cmd_anomaly_train(o);
    if (*adetect) return cmd_anomaly_detect(o);
    if (*htrain) return cmd_har_train(o);
    if (*heval) return cmd_har_eval(o);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
