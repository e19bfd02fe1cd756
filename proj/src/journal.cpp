#include "tripleagent/journal.hpp"

#include <json.hpp>

namespace tripleagent::controller {

using nlohmann::json;

std::string_view to_token(Purpose p) {
  switch (p) {
    case Purpose::Classify:
      return "CLASSIFY";
    case Purpose::Discover:
      return "DISCOVER";
    case Purpose::Assess:
      return "ASSESS";
  }
  return "?";
}

Purpose purpose_from_token(std::string_view token) {
  if (token == "CLASSIFY") return Purpose::Classify;
  if (token == "DISCOVER") return Purpose::Discover;
  if (token == "ASSESS") return Purpose::Assess;
  throw ParseError("unknown purpose token: " + std::string(token));
}

std::string_view to_token(HealthStatus h) {
  switch (h) {
    case HealthStatus::Healthy:
      return "HEALTHY";
    case HealthStatus::Restarted:
      return "RESTARTED";
    case HealthStatus::Unrecoverable:
      return "UNRECOVERABLE";
  }
  return "?";
}

HealthStatus health_from_token(std::string_view token) {
  if (token == "HEALTHY") return HealthStatus::Healthy;
  if (token == "RESTARTED") return HealthStatus::Restarted;
  if (token == "UNRECOVERABLE") return HealthStatus::Unrecoverable;
  throw ParseError("unknown health token: " + std::string(token));
}

bool ExperimentRecord::same_outcome(const ExperimentRecord& other) const {
  return key() == other.key() && verdict == other.verdict && exit == other.exit &&
         timed_out == other.timed_out && point_reaches == other.point_reaches &&
         injection_count == other.injection_count && injection_stack == other.injection_stack &&
         caught == other.caught && post_health == other.post_health && anomaly == other.anomaly;
}

namespace {

json point_to_json(const model::PerturbationPoint& point) {
  return {{"method", point.method.identifier},
          {"location", point.location},
          {"exception", point.exception_type}};
}

model::PerturbationPoint point_from_json(const json& value) {
  model::PerturbationPoint point;
  point.method.identifier = value.at("method").get<std::string>();
  point.location = value.at("location").get<std::uint32_t>();
  point.exception_type = value.at("exception").get<std::string>();
  return point;
}

}  // namespace

std::string serialize_record(const ExperimentRecord& record) {
  json doc;
  doc["id"] = record.id;
  doc["purpose"] = std::string(to_token(record.purpose));
  doc["point"] = point_to_json(record.point);
  doc["fault_model"] = std::string(model::to_token(record.fault_model));
  doc["fo_handler"] =
      record.fo_handler ? json(record.fo_handler->identifier) : json(nullptr);
  doc["verdict"] = std::string(model::to_token(record.verdict.reason));
  doc["exit"] = std::string(model::to_token(record.exit));
  doc["timed_out"] = record.timed_out;
  doc["point_reaches"] = record.point_reaches;
  doc["injections"] = record.injection_count;
  json stack = json::array();
  for (const auto& frame : record.injection_stack) stack.push_back(frame.identifier);
  doc["injection_stack"] = std::move(stack);
  if (record.caught) {
    doc["caught"] = {{"catcher", record.caught->catcher.identifier},
                     {"distance", record.caught->distance},
                     {"kind", std::string(model::to_token(record.caught->kind))}};
  } else {
    doc["caught"] = nullptr;
  }
  doc["post_health"] =
      record.post_health ? json(std::string(to_token(*record.post_health))) : json(nullptr);
  doc["anomaly"] = record.anomaly ? json(*record.anomaly) : json(nullptr);
  doc["wall_ms"] = record.wall_ms;
  return doc.dump();
}

ExperimentRecord parse_record(const std::string& line) {
  json doc;
  try {
    doc = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("journal record: ") + e.what());
  }
  try {
    ExperimentRecord record;
    record.id = doc.at("id").get<std::uint64_t>();
    record.purpose = purpose_from_token(doc.at("purpose").get<std::string>());
    record.point = point_from_json(doc.at("point"));
    record.fault_model = model::fault_model_from_token(doc.at("fault_model").get<std::string>());
    if (!doc.at("fo_handler").is_null()) {
      record.fo_handler = model::MethodRef{doc.at("fo_handler").get<std::string>()};
    }
    record.verdict.reason = model::verdict_reason_from_token(doc.at("verdict").get<std::string>());
    record.exit = model::exit_kind_from_token(doc.at("exit").get<std::string>());
    record.timed_out = doc.at("timed_out").get<bool>();
    record.point_reaches = doc.at("point_reaches").get<std::uint64_t>();
    record.injection_count = doc.at("injections").get<std::uint64_t>();
    for (const auto& frame : doc.at("injection_stack")) {
      record.injection_stack.push_back(model::MethodRef{frame.get<std::string>()});
    }
    if (!doc.at("caught").is_null()) {
      const json& caught = doc.at("caught");
      ExperimentRecord::CaughtInfo info;
      info.catcher.identifier = caught.at("catcher").get<std::string>();
      info.distance = caught.at("distance").get<std::uint32_t>();
      info.kind = model::handler_kind_from_token(caught.at("kind").get<std::string>());
      record.caught = std::move(info);
    }
    if (!doc.at("post_health").is_null()) {
      record.post_health = health_from_token(doc.at("post_health").get<std::string>());
    }
    if (!doc.at("anomaly").is_null()) {
      record.anomaly = doc.at("anomaly").get<std::string>();
    }
    record.wall_ms = doc.at("wall_ms").get<double>();
    return record;
  } catch (const json::exception& e) {
    throw ParseError(std::string("journal record: ") + e.what());
  }
}

Journal::Journal(std::filesystem::path file, std::string config_fingerprint)
    : file_(std::move(file)), fingerprint_(std::move(config_fingerprint)) {
  if (std::filesystem::exists(file_)) {
    std::ifstream in(file_);
    if (!in) throw IoError("cannot open journal " + file_.string());
    std::string line;
    bool header_seen = false;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
      ++line_number;
      if (line.empty()) continue;
      if (!header_seen) {
        json header;
        try {
          header = json::parse(line);
        } catch (const json::parse_error&) {
          throw IntegrityError("journal header is unreadable");
        }
        if (!header.contains("journal_version") || !header.at("journal_version").is_number() ||
            header.at("journal_version").get<int>() != 1) {
          throw IntegrityError("unsupported journal version");
        }
        if (!header.contains("config_fingerprint") ||
            !header.at("config_fingerprint").is_string()) {
          throw IntegrityError("journal header is missing the config fingerprint");
        }
        const std::string stored = header.at("config_fingerprint").get<std::string>();
        if (stored != fingerprint_) {
          throw IntegrityError(
              "journal was written under a different configuration; refusing to resume");
        }
        header_seen = true;
        continue;
      }
      try {
        existing_.push_back(parse_record(line));
      } catch (const ParseError&) {
        // a torn final line means the previous run died mid-append
        if (in.peek() != EOF) {
          throw IntegrityError("journal line " + std::to_string(line_number) + " is corrupt");
        }
      }
    }
    for (const auto& record : existing_) {
      next_id_ = std::max(next_id_, record.id + 1);
    }
  }
  out_.open(file_, std::ios::app);
  if (!out_) throw IoError("cannot open journal " + file_.string() + " for appending");
  if (existing_.empty() && std::filesystem::file_size(file_) == 0) {
    json header = {{"journal_version", 1}, {"config_fingerprint", fingerprint_}};
    out_ << header.dump() << '\n';
    out_.flush();
  }
}

void Journal::append(const ExperimentRecord& record) {
  const std::string line = serialize_record(record);
  std::lock_guard<std::mutex> lock(mutex_);
  out_ << line << '\n';
  out_.flush();
  if (!out_) throw IoError("journal append failed");
}

std::uint64_t Journal::next_id() {
  std::lock_guard<std::mutex> lock(mutex_);
  return next_id_++;
}

}  // namespace tripleagent::controller
