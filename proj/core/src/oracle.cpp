#include "predictchain/oracle.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <condition_variable>
#include <thread>

#include "fsutil.hpp"
#include "predictchain/error.hpp"

namespace predictchain::oracle {

namespace fs = std::filesystem;
using nlohmann::json;
using tokenomics::PriceKind;

namespace {

constexpr std::size_t kMaxErrorText = 240;

// A business-level rejection with a status that is not an Errc name.
struct Rejection {
  std::string status;
  std::string message;
};

std::string decimal_text(double v) {
  if (!std::isfinite(v) || std::fabs(v) > 1e9) return "0";
  return Decimal::from_double(v).to_string();
}

std::string raw_text(const protocol::Args& args, std::string_view key) {
  const auto it = args.find(key);
  if (it == args.end()) return "?";
  if (it->second.is_string()) {
    const auto& s = it->second.get_ref<const std::string&>();
    return s.empty() ? "?" : s;
  }
  return it->second.dump();
}

std::uint64_t seed_for(std::uint64_t base, std::string_view request_id) {
  const std::string digest = sha256_hex(request_id);
  std::uint64_t v = 0;
  std::from_chars(digest.data(), digest.data() + 16, v, 16);
  return base ^ v;
}

models::Hyperparams hyperparams_from(const protocol::Args& args) {
  models::Hyperparams hp;
  hp.num_epochs = static_cast<int>(protocol::arg_int(args, "num_epochs"));
  hp.target_attrib = protocol::arg_string(args, "target_attrib");
  hp.hidden_dim = static_cast<int>(protocol::arg_int(args, "hidden_dim"));
  hp.num_hidden_layers = static_cast<int>(protocol::arg_int(args, "num_hidden_layers"));
  hp.time_lag = static_cast<int>(protocol::arg_int(args, "time_lag"));
  hp.training_lookback = static_cast<int>(protocol::arg_int(args, "training_lookback"));
  if (const auto v = protocol::arg_optional_int(args, "sub_split_value")) hp.sub_split_value = static_cast<int>(*v);
  return hp;
}

std::vector<std::string> features_for(const datastore::DatasetMeta& meta, std::string_view target) {
  std::vector<std::string> exclude;
  if (meta.time_attrib) exclude.push_back(*meta.time_attrib);
  return models::feature_columns_from_schema(meta.schema, target, exclude);
}

Effect reward_effect(const Address& to, MicroAlgos amount, std::string_view reason,
                     const std::string& ref_name, Decimal accuracy) {
  return {to,
          amount,
          {std::string(protocol::op::kReward),
           {{"reason", std::string(reason)}, {"ref_name", ref_name}, {"accuracy", accuracy.to_string()}}}};
}

// Keeps a note under the cap by dropping the free-text error, then
// shortening long string arguments.
Bytes encode_capped(protocol::NoteEnvelope& note) {
  try {
    return protocol::encode_note(note);
  } catch (const Error& e) {
    if (e.code() != Errc::oversize) throw;
  }
  note.args.erase("error");
  for (auto& [key, value] : note.args) {
    if (value.is_string() && value.get_ref<const std::string&>().size() > 64) {
      value = value.get<std::string>().substr(0, 64);
    }
  }
  return protocol::encode_note(note);
}

}  // namespace

std::string_view to_string(JobStatus status) noexcept {
  switch (status) {
    case JobStatus::queued: return "queued";
    case JobStatus::running: return "running";
    case JobStatus::done: return "done";
    case JobStatus::failed: return "failed";
  }
  return "?";
}

JobStatus parse_job_status(std::string_view text) {
  for (const auto s : {JobStatus::queued, JobStatus::running, JobStatus::done, JobStatus::failed}) {
    if (to_string(s) == text) return s;
  }
  throw Error(Errc::parse, "unknown job status '" + std::string(text) + "'");
}

json Effect::to_json() const {
  json args = json::object();
  for (const auto& [k, v] : note.args) args[k] = v;
  return {{"to", to}, {"amount", amount}, {"op", note.op}, {"args", args}};
}

Effect Effect::from_json(const json& j) {
  Effect e;
  e.to = j.at("to").get<std::string>();
  e.amount = j.at("amount").get<MicroAlgos>();
  e.note.op = j.at("op").get<std::string>();
  for (const auto& [k, v] : j.at("args").items()) e.note.args.emplace(k, v);
  return e;
}

json PendingJob::to_json() const {
  json a = json::object();
  for (const auto& [k, v] : args) a[k] = v;
  json j = {{"request_txn_id", request_txn_id},
            {"op", op},
            {"args", a},
            {"payer", payer},
            {"paid", paid},
            {"round", round},
            {"timestamp", timestamp},
            {"status", std::string(to_string(status))},
            {"effects_sent", effects_sent},
            {"outcome", outcome},
            {"settlement", settlement}};
  if (effects) {
    json list = json::array();
    for (const auto& e : *effects) list.push_back(e.to_json());
    j["effects"] = std::move(list);
  }
  return j;
}

PendingJob PendingJob::from_json(const json& j) {
  PendingJob job;
  job.request_txn_id = j.at("request_txn_id").get<std::string>();
  job.op = j.at("op").get<std::string>();
  for (const auto& [k, v] : j.at("args").items()) job.args.emplace(k, v);
  job.payer = j.at("payer").get<std::string>();
  job.paid = j.at("paid").get<MicroAlgos>();
  job.round = j.at("round").get<std::int64_t>();
  job.timestamp = j.at("timestamp").get<std::int64_t>();
  job.status = parse_job_status(j.at("status").get<std::string>());
  job.effects_sent = j.value("effects_sent", std::size_t{0});
  job.outcome = j.value("outcome", "");
  job.settlement = j.value("settlement", json());
  if (j.contains("effects")) {
    job.effects.emplace();
    for (const auto& e : j["effects"]) job.effects->push_back(Effect::from_json(e));
  }
  return job;
}

JobStore::JobStore(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

fs::path JobStore::path_for(std::string_view id) const {
  // Ids are opaque; hash them so any adapter's ids make safe file names.
  return dir_ / (sha256_hex(id).substr(0, 32) + ".json");
}

bool JobStore::contains(std::string_view id) const {
  std::lock_guard lock(mutex_);
  return fs::exists(path_for(id));
}

std::optional<PendingJob> JobStore::get(std::string_view id) const {
  std::lock_guard lock(mutex_);
  const auto p = path_for(id);
  if (!fs::exists(p)) return std::nullopt;
  return PendingJob::from_json(json::parse(detail::read_text(p)));
}

void JobStore::put(const PendingJob& job) {
  std::lock_guard lock(mutex_);
  detail::write_file_atomic(path_for(job.request_txn_id), job.to_json().dump(1));
}

std::vector<PendingJob> JobStore::all() const {
  std::lock_guard lock(mutex_);
  std::vector<PendingJob> out;
  for (const auto& entry : fs::directory_iterator(dir_)) {
    if (entry.path().extension() != ".json") continue;
    out.push_back(PendingJob::from_json(json::parse(detail::read_text(entry.path()))));
  }
  std::sort(out.begin(), out.end(), [](const PendingJob& a, const PendingJob& b) {
    return std::tie(a.round, a.request_txn_id) < std::tie(b.round, b.request_txn_id);
  });
  return out;
}

std::vector<PendingJob> JobStore::unfinished() const {
  auto jobs = all();
  std::erase_if(jobs, [](const PendingJob& j) {
    return j.status == JobStatus::done || j.status == JobStatus::failed;
  });
  return jobs;
}

PriceQuery PriceQuery::from_params(const std::map<std::string, std::string>& params) {
  auto get = [&](const std::string& key) -> std::optional<std::string> {
    const auto it = params.find(key);
    if (it == params.end() || it->second.empty()) return std::nullopt;
    return it->second;
  };
  auto get_int = [&](const std::string& key) -> std::optional<std::int64_t> {
    const auto s = get(key);
    if (!s) return std::nullopt;
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s->data(), s->data() + s->size(), v);
    if (ec != std::errc() || ptr != s->data() + s->size()) {
      throw Error(Errc::invalid_argument, "parameter '" + key + "' is not an integer: '" + *s + "'");
    }
    return v;
  };
  const auto kind = get("kind");
  if (!kind) throw Error(Errc::invalid_argument, "missing price kind");
  PriceQuery q;
  q.kind = tokenomics::parse_price_kind(*kind);
  q.ds_size = get_int("ds_size");
  q.model_name = get("model_name");
  if (const auto a = get("raw_model")) q.archetype = models::parse_archetype(*a);
  q.ds_name = get("ds_name");
  if (const auto d = get_int("input_dim")) {
    if (*d < 1) throw Error(Errc::invalid_argument, "input_dim must be positive");
    q.input_dim = static_cast<std::size_t>(*d);
  }
  if (const auto v = get_int("hidden_dim")) q.hyperparams.hidden_dim = static_cast<int>(*v);
  if (const auto v = get_int("num_hidden_layers")) q.hyperparams.num_hidden_layers = static_cast<int>(*v);
  if (const auto v = get_int("training_lookback")) q.hyperparams.training_lookback = static_cast<int>(*v);
  if (const auto v = get("target_attrib")) q.hyperparams.target_attrib = *v;
  return q;
}

std::map<std::string, std::string> PriceQuery::to_params() const {
  std::map<std::string, std::string> p{{"kind", std::string(tokenomics::to_string(kind))}};
  if (ds_size) p["ds_size"] = std::to_string(*ds_size);
  if (model_name) p["model_name"] = *model_name;
  if (archetype) p["raw_model"] = std::string(models::to_string(*archetype));
  if (ds_name) p["ds_name"] = *ds_name;
  if (input_dim) p["input_dim"] = std::to_string(*input_dim);
  if (kind == PriceKind::train_model) {
    p["hidden_dim"] = std::to_string(hyperparams.hidden_dim);
    p["num_hidden_layers"] = std::to_string(hyperparams.num_hidden_layers);
    p["training_lookback"] = std::to_string(hyperparams.training_lookback);
    p["target_attrib"] = hyperparams.target_attrib;
  }
  return p;
}

json PriceQuote::to_json() const {
  json j = {{"kind", std::string(tokenomics::to_string(kind))}, {"price_microalgo", price}};
  if (complexity) j["complexity"] = complexity->to_string();
  return j;
}

PriceQuote PriceQuote::from_json(const json& j) {
  PriceQuote q;
  q.kind = tokenomics::parse_price_kind(j.at("kind").get<std::string>());
  q.price = j.at("price_microalgo").get<MicroAlgos>();
  if (j.contains("complexity")) q.complexity = Decimal::parse(j["complexity"].get<std::string>());
  return q;
}

OracleConfig OracleConfig::from(const config::KeyValues& kv) {
  OracleConfig c;
  c.address = kv.get("oracle_address", c.address);
  c.ledger = config::LedgerConfig::from(kv);
  c.schedule_file = kv.get_path("schedule_file", c.schedule_file);
  c.storage_root = kv.get_path("storage_root", c.storage_root);
  c.state_dir = kv.get_path("state_dir", c.state_dir);
  c.dataset_environment = kv.get("dataset_environment", c.dataset_environment);
  c.poll_interval = std::chrono::milliseconds(kv.get_int("poll_interval_ms", c.poll_interval.count()));
  c.worker_count = static_cast<int>(kv.get_int("worker_count", c.worker_count));
  c.http_host = kv.get("http_host", c.http_host);
  c.http_port = static_cast<int>(kv.get_int("http_port", c.http_port));
  c.initial_funding = kv.get_int("initial_funding", c.initial_funding);
  c.train_seed = static_cast<std::uint64_t>(kv.get_int("train_seed", 0));
  if (c.worker_count < 1) throw Error(Errc::parse, "worker_count must be at least 1");
  if (c.poll_interval.count() < 1) throw Error(Errc::parse, "poll_interval_ms must be positive");
  return c;
}

namespace {

OracleConfig prepared(OracleConfig c) {
  fs::create_directories(c.state_dir);
  fs::create_directories(c.storage_root);
  if (c.schedule_file.has_parent_path()) fs::create_directories(c.schedule_file.parent_path());
  if (c.worker_count > 1) {
    spdlog::warn("worker_count {} requested; jobs run sequentially on one worker", c.worker_count);
  }
  return c;
}

}  // namespace

Oracle::Oracle(OracleConfig config, ledger::ChainAdapter& chain)
    : config_(prepared(std::move(config))),
      chain_(chain),
      schedule_(tokenomics::load_schedule_file(config_.schedule_file), config_.schedule_file),
      storage_(config_.storage_root),
      dataset_registry_(config_.state_dir / "datasets.jsonl"),
      dataset_store_(storage_, dataset_registry_),
      model_registry_(config_.state_dir / "models.jsonl"),
      jobs_(config_.state_dir / "jobs"),
      monitor_(config_.address, chain,
               {config_.poll_interval, monitor::kDefaultLatenessWindowMs, config_.state_dir / "monitor.state"}) {
  const auto log = chain_.transactions();
  schedule_.rebuild_history(log, config_.address);
  for (const auto& txn : log) {
    if (txn.sender != config_.address) continue;
    try {
      const auto env = protocol::decode_note(txn.note);
      const auto req = env.args.find("req");
      const auto eff = env.args.find("eff");
      if (req != env.args.end() && eff != env.args.end() && req->second.is_string() &&
          eff->second.is_number_integer()) {
        sent_before_start_.emplace(req->second.get<std::string>(), eff->second.get<std::size_t>());
      }
    } catch (const Error&) {
    }
  }
  if (config_.initial_funding > 0) {
    const MicroAlgos have = chain_.balance(config_.address);
    if (have < config_.initial_funding) {
      try {
        chain_.faucet(config_.address, config_.initial_funding - have);
      } catch (const Error& e) {
        spdlog::warn("oracle funding skipped: {}", e.what());
      }
    }
  }
}

PriceQuote Oracle::quote(const PriceQuery& q) {
  PriceQuote out;
  out.kind = q.kind;
  tokenomics::PriceContext ctx;
  switch (q.kind) {
    case PriceKind::dataset_upload:
      ctx.ds_size = q.ds_size;
      break;
    case PriceKind::train_model: {
      if (!q.archetype) throw Error(Errc::invalid_argument, "train_model price needs raw_model");
      std::size_t input_dim = q.input_dim.value_or(1);
      if (q.ds_name) {
        const auto meta = dataset_registry_.find(*q.ds_name);
        if (!meta) throw Error(Errc::not_found, "unknown dataset '" + *q.ds_name + "'");
        input_dim = features_for(*meta, q.hyperparams.target_attrib).size();
      }
      q.hyperparams.validate();
      out.complexity = models::model_complexity(*q.archetype, input_dim, q.hyperparams);
      ctx.complexity = out.complexity;
      break;
    }
    case PriceKind::query_model: {
      if (!q.model_name) throw Error(Errc::invalid_argument, "query_model price needs model_name");
      const auto meta = model_registry_.find(*q.model_name);
      if (!meta) throw Error(Errc::not_found, "unknown model '" + *q.model_name + "'");
      out.complexity = meta->complexity;
      ctx.complexity = out.complexity;
      break;
    }
  }
  out.price = tokenomics::price(q.kind, ctx, schedule_.current());
  return out;
}

std::vector<datastore::DatasetMeta> Oracle::datasets() { return dataset_registry_.list(); }
std::vector<models::ModelMeta> Oracle::models() { return model_registry_.list(); }

void Oracle::enqueue(const monitor::Event& event) {
  const auto& txn = event.txn;
  if (txn.sender == config_.address) return;  // our own schedule log
  const auto* info = protocol::find_opcode(event.envelope.op);
  if (!info || info->kind != protocol::OpKind::request) {
    spdlog::warn("oracle: ignoring {} with non-request opcode {}", txn.id, event.envelope.op);
    return;
  }
  if (jobs_.contains(txn.id)) return;
  PendingJob job;
  job.request_txn_id = txn.id;
  job.op = event.envelope.op;
  job.args = event.envelope.args;
  job.payer = txn.sender;
  job.paid = txn.amount;
  job.round = txn.round;
  job.timestamp = txn.timestamp;
  jobs_.put(job);
  spdlog::info("oracle: queued {} {} from {} paying {}", job.op, job.request_txn_id, job.payer, job.paid);
}

std::vector<Effect> Oracle::execute(const PendingJob& job, bool recovering) {
  const auto schedule = schedule_.at_round(job.round);
  std::vector<Effect> effects;
  protocol::NoteEnvelope response{std::string(protocol::response_for(job.op)), {}};
  std::string status;
  std::string message;
  std::optional<double> diverged_loss;
  try {
    const auto args = protocol::validate_args(job.op, job.args);
    if (job.op == protocol::op::kUpDataset) {
      effects = handle_up_dataset(job, args, schedule, recovering);
    } else if (job.op == protocol::op::kTrainModel) {
      effects = handle_train_model(job, args, schedule, recovering);
    } else {
      effects = handle_query_model(job, args, schedule);
    }
  } catch (const Rejection& r) {
    status = r.status;
    message = r.message;
  } catch (const models::DivergedError& e) {
    status = std::string(to_string(e.code()));
    message = e.what();
    if (std::isfinite(e.last_finite_loss())) diverged_loss = e.last_finite_loss();
  } catch (const Error& e) {
    status = std::string(to_string(e.code()));
    message = e.what();
  } catch (const std::exception& e) {
    status = "internal";
    message = e.what();
  }

  if (!status.empty()) {
    spdlog::warn("oracle: {} {} failed ({}): {}", job.op, job.request_txn_id, status, message);
    if (job.op == protocol::op::kUpDataset) {
      response.args = {{"ds_name", raw_text(job.args, "ds_name")}};
    } else if (job.op == protocol::op::kTrainModel) {
      response.args = {{"model_name", raw_text(job.args, "new_model_name")},
                       {"loss", diverged_loss ? decimal_text(*diverged_loss) : "0"},
                       {"accuracy", "0"}};
    } else {
      response.args = {{"model_name", raw_text(job.args, "model_name")}, {"output", "[]"}};
    }
    response.args["status"] = status;
    response.args["error"] = message.substr(0, kMaxErrorText);
    effects = {{job.payer, job.paid, response}};  // full refund
  }

  for (std::size_t k = 0; k < effects.size(); ++k) {
    effects[k].note.args["req"] = job.request_txn_id;
    effects[k].note.args["eff"] = k;
    encode_capped(effects[k].note);
  }
  return effects;
}

std::vector<Effect> Oracle::handle_up_dataset(const PendingJob& job, const protocol::Args& args,
                                              const tokenomics::RewardSchedule& schedule,
                                              bool recovering) {
  const std::string ds_name = protocol::arg_string(args, "ds_name");
  const std::string ds_link = protocol::arg_string(args, "ds_link");
  const std::int64_t ds_size = protocol::arg_int(args, "ds_size");
  if (ds_size < 0) throw Error(Errc::invalid_argument, "ds_size must be non-negative");
  const MicroAlgos due = tokenomics::price(PriceKind::dataset_upload, {ds_size, std::nullopt}, schedule);
  if (job.paid < due) {
    throw Rejection{"underpaid", "paid " + std::to_string(job.paid) + ", price " + std::to_string(due)};
  }
  // The stored link rides on the response so the registry can be rebuilt from the chain.
  const auto ok = [&](const std::string& stored) {
    return protocol::NoteEnvelope{std::string(protocol::op::kDatasetUp),
                                  {{"ds_name", ds_name}, {"ds_link", stored}, {"status", "ok"}}};
  };
  if (const auto existing = dataset_registry_.find(ds_name)) {
    if (recovering && existing->uploader == job.payer && existing->ds_size == ds_size) {
      return {{job.payer, 0, ok(existing->ds_link)}};
    }
    throw Error(Errc::duplicate, "dataset '" + ds_name + "' already registered");
  }
  const Bytes raw = storage_.fetch(ds_link);
  if (static_cast<std::int64_t>(raw.size()) != ds_size) {
    throw Rejection{"size_mismatch", "declared " + std::to_string(ds_size) + " bytes, link holds " +
                                         std::to_string(raw.size())};
  }
  const auto meta = dataset_store_.save_dataset(raw, ds_name, config_.dataset_environment, job.payer,
                                                protocol::arg_optional_string(args, "time_attrib"),
                                                protocol::arg_optional_string(args, "sub_split_attrib"));
  spdlog::info("oracle: stored dataset {} ({} bytes, {} rows) at {}", ds_name, meta.ds_size, meta.row_count,
               meta.ds_link);
  return {{job.payer, 0, ok(meta.ds_link)}};
}

std::vector<Effect> Oracle::handle_train_model(const PendingJob& job, const protocol::Args& args,
                                               const tokenomics::RewardSchedule& schedule,
                                               bool recovering) {
  const std::string ds_name = protocol::arg_string(args, "ds_name");
  const std::string model_name = protocol::arg_string(args, "new_model_name");
  const auto archetype = models::parse_archetype(protocol::arg_string(args, "raw_model"));
  const models::Hyperparams hp = hyperparams_from(args);
  hp.validate();

  const auto ds = dataset_registry_.find(ds_name);
  if (!ds) throw Error(Errc::not_found, "unknown dataset '" + ds_name + "'");
  const auto features = features_for(*ds, hp.target_attrib);
  const Decimal complexity = models::model_complexity(archetype, features.size(), hp);
  const MicroAlgos due = tokenomics::price(PriceKind::train_model, {std::nullopt, complexity}, schedule);
  if (job.paid < due) {
    throw Rejection{"underpaid", "paid " + std::to_string(job.paid) + ", price " + std::to_string(due)};
  }

  double loss = 0.0;
  double accuracy = 0.0;
  std::string model_link;
  if (const auto existing = model_registry_.find(model_name)) {
    if (!(recovering && existing->trainer == job.payer && existing->ds_name == ds_name)) {
      throw Error(Errc::duplicate, "model '" + model_name + "' already registered");
    }
    loss = existing->loss;
    accuracy = existing->accuracy;
    model_link = existing->model_link;
  } else {
    const std::uint64_t seed = seed_for(config_.train_seed, job.request_txn_id);
    models::TrainedModel model = models::create_model(archetype, features.size(), hp, seed);
    model.model_name = model_name;
    model.trainer = job.payer;
    model.ds_name = ds_name;
    model.feature_columns = features;
    models::TrainOptions options;
    options.seed = seed;
    if (ds->sub_split_attrib) options.sub_split_attrib = *ds->sub_split_attrib;
    auto result = models::train(model, cached_frame(*ds), options);
    model_link = models::save_model(result.model, storage_.environment(config_.dataset_environment));
    model_registry_.add(models::ModelMeta::describe(result.model, model_link));
    loss = result.model.final_loss;
    accuracy = result.model.accuracy;
    spdlog::info("oracle: trained {} {} on {}: loss {} accuracy {}", models::to_string(archetype), model_name,
                 ds_name, loss, accuracy);
    model_cache_.insert_or_assign(model_name, std::move(result.model));
  }

  const Decimal acc = std::clamp(Decimal::from_double(accuracy), Decimal{}, Decimal::from_int(1));
  std::vector<Effect> effects;
  effects.push_back(reward_effect(ds->uploader, tokenomics::dataset_reward(ds->ds_size, schedule.dataset_mult, acc),
                                  "dataset_usage", ds_name, acc));
  effects.push_back({job.payer,
                     0,
                     {std::string(protocol::op::kModelTrained),
                      {{"model_name", model_name},
                       {"model_link", model_link},
                       {"loss", decimal_text(loss)},
                       {"accuracy", acc.to_string()},
                       {"status", "ok"}}}});
  return effects;
}

std::vector<Effect> Oracle::handle_query_model(const PendingJob& job, const protocol::Args& args,
                                               const tokenomics::RewardSchedule& schedule) {
  const std::string model_name = protocol::arg_string(args, "model_name");
  const std::string input = protocol::arg_string(args, "input");
  const auto meta = model_registry_.find(model_name);
  if (!meta) throw Error(Errc::not_found, "unknown model '" + model_name + "'");
  const MicroAlgos due = tokenomics::price(PriceKind::query_model, {std::nullopt, meta->complexity}, schedule);
  if (job.paid < due) {
    throw Rejection{"underpaid", "paid " + std::to_string(job.paid) + ", price " + std::to_string(due)};
  }
  const models::TrainedModel& model = cached_model(*meta);

  protocol::NoteEnvelope response{std::string(protocol::op::kQueryResult),
                                  {{"model_name", model_name}, {"status", "ok"}}};
  std::vector<Effect> effects;
  if (!input.empty() && input.front() == '[') {
    const json parsed = json::parse(input, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_array()) {
      throw Error(Errc::invalid_argument, "query input is not a JSON array");
    }
    // Flat row-major values, or one array per time step.
    std::vector<double> window;
    const auto take = [&](const json& v) {
      if (!v.is_number()) throw Error(Errc::invalid_argument, "query input must hold numbers only");
      window.push_back(v.get<double>());
    };
    for (const auto& item : parsed) {
      if (item.is_array()) {
        for (const auto& v : item) take(v);
      } else {
        take(item);
      }
    }
    const double y = models::query(model, window);
    response.args["output"] = json::array({y}).dump();
  } else {
    const auto colon = input.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == input.size()) {
      throw Error(Errc::invalid_argument, "query input must be a JSON array or a ds_name:row reference");
    }
    const std::string ds_name = input.substr(0, colon);
    std::size_t row = 0;
    const char* first = input.data() + colon + 1;
    const char* last = input.data() + input.size();
    const auto [ptr, ec] = std::from_chars(first, last, row);
    if (ec != std::errc() || ptr != last) {
      throw Error(Errc::invalid_argument, "row index '" + input.substr(colon + 1) + "' is not a number");
    }
    const auto ds = dataset_registry_.find(ds_name);
    if (!ds) throw Error(Errc::not_found, "unknown dataset '" + ds_name + "'");
    const datastore::TableFrame* frame = &cached_frame(*ds);
    datastore::TableFrame subset;
    if (model.hyperparams.sub_split_value) {
      subset = datastore::split_by_attribute(*frame, ds->sub_split_attrib.value_or(models::TrainOptions{}.sub_split_attrib),
                                             static_cast<std::size_t>(*model.hyperparams.sub_split_value));
      frame = &subset;
    }
    const auto pred = models::query_row(model, *frame, row);
    const Decimal acc = std::clamp(Decimal::from_double(pred.accuracy), Decimal{}, Decimal::from_int(1));
    response.args["output"] = json::array({pred.prediction}).dump();
    response.args["actual"] = json(pred.actual).dump();
    response.args["accuracy"] = acc.to_string();
    effects.push_back(reward_effect(meta->trainer, tokenomics::training_reward(schedule.training_mult, acc),
                                    "model_training", model_name, acc));
    effects.push_back(reward_effect(ds->uploader, tokenomics::dataset_reward(ds->ds_size, schedule.dataset_mult, acc),
                                    "dataset_usage", ds_name, acc));
  }
  effects.push_back({job.payer, 0, std::move(response)});
  return effects;
}

const models::TrainedModel& Oracle::cached_model(const models::ModelMeta& meta) {
  auto it = model_cache_.find(meta.model_name);
  if (it == model_cache_.end()) {
    it = model_cache_.emplace(meta.model_name, models::load_model(meta.model_link, storage_)).first;
  }
  return it->second;
}

const datastore::TableFrame& Oracle::cached_frame(const datastore::DatasetMeta& meta) {
  auto it = frame_cache_.find(meta.ds_name);
  if (it == frame_cache_.end()) {
    it = frame_cache_.emplace(meta.ds_name, dataset_store_.load_dataset(meta.ds_link)).first;
  }
  return it->second;
}

bool Oracle::effect_on_chain(const std::string& request_id, std::size_t index) {
  return sent_before_start_.contains({request_id, index});
}

void Oracle::send_effects(PendingJob& job) {
  auto& effects = *job.effects;
  for (std::size_t k = job.effects_sent; k < effects.size(); ++k) {
    if (effect_on_chain(job.request_txn_id, k)) {
      spdlog::info("oracle: effect {} of {} already on chain", k, job.request_txn_id);
    } else {
      auto& e = effects[k];
      const std::string id = chain_.submit({config_.address, e.to, e.amount, encode_capped(e.note)});
      spdlog::info("oracle: sent {} {} microALGO to {} ({})", e.note.op, e.amount, e.to, id);
    }
    job.effects_sent = k + 1;
    jobs_.put(job);
  }
}

std::size_t Oracle::work(std::stop_token stop) {
  std::lock_guard lock(work_mutex_);
  std::size_t finished = 0;
  for (auto& job : jobs_.unfinished()) {
    if (stop.stop_requested()) break;
    const bool recovering = job.status == JobStatus::running;
    if (job.status == JobStatus::queued) {
      job.status = JobStatus::running;
      jobs_.put(job);
    }
    if (!job.effects) {
      job.effects = execute(job, recovering);
      const auto& response = job.effects->back().note;
      job.outcome = response.args.at("status").get<std::string>();
      MicroAlgos rewards = 0;
      for (std::size_t k = 0; k + 1 < job.effects->size(); ++k) rewards += (*job.effects)[k].amount;
      if (job.outcome == "ok") {
        const auto s = tokenomics::settle(job.paid, schedule_.at_round(job.round).fee_fraction, rewards);
        job.settlement = {{"paid", s.paid}, {"fee", s.fee}, {"available", s.available},
                          {"rewards", s.rewards}, {"shortfall", s.shortfall}};
        if (s.shortfall > 0) {
          spdlog::info("oracle: {} rewards exceed the request payment by {} microALGO; paid from oracle funds",
                       job.request_txn_id, s.shortfall);
        }
      } else {
        job.settlement = {{"paid", job.paid}, {"refund", job.paid}};
      }
      jobs_.put(job);
    }
    try {
      send_effects(job);
    } catch (const Error& e) {
      spdlog::error("oracle: cannot send effects for {}: {}", job.request_txn_id, e.what());
      break;  // retried on the next round; order is preserved
    }
    job.status = job.outcome == "ok" ? JobStatus::done : JobStatus::failed;
    jobs_.put(job);
    ++finished;
  }
  return finished;
}

std::size_t Oracle::step() {
  monitor_.poll_and_dispatch([this](const monitor::Event& e) { enqueue(e); });
  return work();
}

void Oracle::run(std::stop_token stop) {
  std::mutex mutex;
  std::condition_variable_any wake;
  bool pending = true;
  std::jthread poller([&](std::stop_token) {
    monitor_.run(
        [&](const monitor::Event& e) {
          enqueue(e);
          std::lock_guard lock(mutex);
          pending = true;
          wake.notify_all();
        },
        stop);
  });
  while (!stop.stop_requested()) {
    {
      std::unique_lock lock(mutex);
      wake.wait_for(lock, stop, config_.poll_interval, [&] { return pending; });
      pending = false;
    }
    work(stop);
  }
}

std::string Oracle::update_schedule(tokenomics::ScheduleField field, Decimal value) {
  return schedule_.log_mult_update(field, value, chain_, config_.address);
}

ChainAudit audit_chain(const std::vector<ledger::Transaction>& chain, const Address& oracle) {
  ChainAudit audit;
  std::map<std::string, std::pair<const ledger::Transaction*, protocol::Args>> requests;
  for (const auto& txn : chain) {
    protocol::NoteEnvelope env;
    try {
      env = protocol::decode_note(txn.note);
    } catch (const Error&) {
      continue;
    }
    const auto* info = protocol::find_opcode(env.op);
    if (!info) continue;
    if (txn.receiver == oracle && txn.sender != oracle && info->kind == protocol::OpKind::request) {
      requests[txn.id] = {&txn, env.args};
      audit.responses_per_request.try_emplace(txn.id, 0);
      audit.net_paid[txn.sender] += txn.amount;
      continue;
    }
    if (txn.sender != oracle) continue;
    const auto req_it = env.args.find("req");
    const std::string req = req_it != env.args.end() && req_it->second.is_string() ? req_it->second.get<std::string>() : "";
    if (info->kind == protocol::OpKind::reward) {
      audit.rewards.push_back({txn.id, txn.receiver, txn.amount, raw_text(env.args, "reason"),
                               raw_text(env.args, "ref_name"), raw_text(env.args, "accuracy"), req});
      continue;
    }
    if (info->kind != protocol::OpKind::response) continue;
    const auto r = requests.find(req);
    if (r == requests.end()) continue;
    ++audit.responses_per_request[req];
    audit.net_paid[txn.receiver] -= txn.amount;
    if (raw_text(env.args, "status") != "ok") continue;
    const auto& [request, args] = r->second;
    if (env.op == protocol::op::kDatasetUp) {
      ChainDataset d;
      d.ds_name = raw_text(args, "ds_name");
      d.uploader = request->sender;
      d.source_link = raw_text(args, "ds_link");
      d.ds_link = raw_text(env.args, "ds_link");
      const auto size = args.find("ds_size");
      if (size != args.end()) {
        d.ds_size = size->second.is_number_integer() ? size->second.get<std::int64_t>()
                                                     : std::stoll(size->second.get<std::string>());
      }
      d.request_txn_id = req;
      audit.datasets[d.ds_name] = d;
    } else if (env.op == protocol::op::kModelTrained) {
      ChainModel m;
      m.model_name = raw_text(env.args, "model_name");
      m.model_link = raw_text(env.args, "model_link");
      m.trainer = request->sender;
      m.archetype = raw_text(args, "raw_model");
      m.ds_name = raw_text(args, "ds_name");
      m.loss = raw_text(env.args, "loss");
      m.accuracy = raw_text(env.args, "accuracy");
      m.request_txn_id = req;
      audit.models[m.model_name] = m;
    }
  }
  return audit;
}

}  // namespace predictchain::oracle
