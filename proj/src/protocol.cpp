#include "tripleagent/protocol.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace tripleagent::protocol {

namespace {

constexpr std::string_view kHeader = "TRIPLEAGENT 1";

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (start <= line.size()) {
    const std::size_t pos = line.find(' ', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  if (text.empty()) return false;
  const auto* begin = text.data();
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc{} && ptr == end;
}

[[noreturn]] void malformed(std::size_t line_number, const std::string& what) {
  throw ParseError("line " + std::to_string(line_number) + ": " + what);
}

std::string require_identifier_field(std::string_view field, std::size_t line_number,
                                     const char* what) {
  if (!model::is_wire_identifier(field)) {
    malformed(line_number, std::string("invalid ") + what + " '" + std::string(field) + "'");
  }
  return std::string(field);
}

/// Complete, newline-terminated lines plus an unterminated tail (if any).
struct SplitLines {
  std::vector<std::string_view> lines;
  bool truncated_tail = false;
};

SplitLines split_lines(std::string_view text) {
  SplitLines out;
  std::size_t start = 0;
  while (start < text.size()) {
    const std::size_t pos = text.find('\n', start);
    if (pos == std::string_view::npos) {
      out.truncated_tail = true;  // file cut off mid-record
      break;
    }
    out.lines.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string slurp(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open " + file.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace

std::string serialize_activation(const ActivationFile& activation) {
  std::ostringstream out;
  out << kHeader << '\n';
  if (activation.plan.active_point) {
    const auto& point = *activation.plan.active_point;
    out << "POINT " << point.method.identifier << ' ' << point.location << ' '
        << point.exception_type << ' ' << model::to_token(activation.plan.fault_model) << '\n';
  }
  for (const auto& handler : activation.fo.active_handlers) {
    out << "FO " << handler.identifier << '\n';
  }
  out << "BUDGET " << activation.step_budget << ' ' << activation.timeout_ms << '\n';
  return out.str();
}

ActivationFile parse_activation(const std::string& text) {
  const SplitLines split = split_lines(text);
  if (split.truncated_tail) throw ParseError("activation file is truncated");
  const auto& lines = split.lines;
  if (lines.empty() || lines[0] != kHeader) {
    throw ParseError("line 1: expected header '" + std::string(kHeader) + "'");
  }
  ActivationFile activation;
  bool seen_point = false;
  bool seen_budget = false;
  std::string previous_fo;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line_number = i + 1;
    if (seen_budget) malformed(line_number, "records after BUDGET");
    const auto fields = split_fields(lines[i]);
    if (fields[0] == "POINT") {
      if (seen_point) malformed(line_number, "more than one POINT record");
      if (!activation.fo.active_handlers.empty()) {
        malformed(line_number, "POINT must precede FO records");
      }
      if (fields.size() != 5) malformed(line_number, "POINT needs 4 fields");
      model::PerturbationPoint point;
      point.method.identifier = require_identifier_field(fields[1], line_number, "method");
      if (!parse_number(fields[2], point.location)) malformed(line_number, "invalid location");
      point.exception_type = require_identifier_field(fields[3], line_number, "exception type");
      try {
        activation.plan.fault_model = model::fault_model_from_token(fields[4]);
      } catch (const ParseError&) {
        malformed(line_number, "invalid fault model");
      }
      activation.plan.active_point = std::move(point);
      seen_point = true;
    } else if (fields[0] == "FO") {
      if (fields.size() != 2) malformed(line_number, "FO needs 1 field");
      std::string handler = require_identifier_field(fields[1], line_number, "method");
      if (!previous_fo.empty() && handler <= previous_fo) {
        malformed(line_number, "FO records must be unique and sorted");
      }
      previous_fo = handler;
      activation.fo.active_handlers.insert(model::MethodRef{std::move(handler)});
    } else if (fields[0] == "BUDGET") {
      if (fields.size() != 3) malformed(line_number, "BUDGET needs 2 fields");
      if (!parse_number(fields[1], activation.step_budget) || activation.step_budget == 0) {
        malformed(line_number, "invalid step budget");
      }
      if (!parse_number(fields[2], activation.timeout_ms) || activation.timeout_ms == 0) {
        malformed(line_number, "invalid timeout");
      }
      seen_budget = true;
    } else {
      malformed(line_number, "unknown record '" + std::string(fields[0]) + "'");
    }
  }
  if (!seen_budget) throw ParseError("activation file has no BUDGET record");
  return activation;
}

ActivationFile load_activation(const std::filesystem::path& file) {
  try {
    return parse_activation(slurp(file));
  } catch (const ParseError& e) {
    throw ParseError(file.string() + ": " + e.what());
  }
}

void write_activation(const ActivationFile& activation, const std::filesystem::path& file) {
  const std::string text = serialize_activation(activation);
  const int fd = ::open(file.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) throw IoError("cannot open " + file.string() + " for writing");
  std::size_t written = 0;
  while (written < text.size()) {
    const ssize_t n = ::write(fd, text.data() + written, text.size() - written);
    if (n < 0) {
      ::close(fd);
      throw IoError("write failed for " + file.string());
    }
    written += static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0) {
    ::close(fd);
    throw IoError("fsync failed for " + file.string());
  }
  ::close(fd);
}

std::string serialize_monitor_log(const MonitorLog& log) {
  std::ostringstream out;
  for (const auto& record : log.records) {
    if (const auto* reach = std::get_if<ReachRecord>(&record)) {
      out << "REACH " << reach->point.method.identifier << ' ' << reach->point.location << ' '
          << reach->point.exception_type << ' ' << reach->count << '\n';
    } else if (const auto* inject = std::get_if<InjectRecord>(&record)) {
      out << "INJECT " << inject->point.method.identifier << ' ' << inject->point.location << ' '
          << inject->point.exception_type << ' ';
      for (std::size_t i = 0; i < inject->stack.size(); ++i) {
        if (i != 0) out << ';';
        out << inject->stack[i].identifier;
      }
      out << '\n';
    } else if (const auto* caught = std::get_if<CatchRecord>(&record)) {
      out << "CATCH " << caught->exception_type << ' ' << caught->raiser.identifier << ' '
          << caught->catcher.identifier << ' ' << caught->distance << ' '
          << model::to_token(caught->kind) << '\n';
    }
  }
  if (log.complete) {
    out << "EXIT " << (log.exit == model::ExitKind::Normal ? "NORMAL" : "CRASH") << '\n';
  }
  return out.str();
}

MonitorLog parse_monitor_log_text(const std::string& text) {
  const SplitLines split = split_lines(text);
  MonitorLog log;
  log.complete = false;
  log.exit = model::ExitKind::Crash;
  for (std::size_t i = 0; i < split.lines.size(); ++i) {
    const std::size_t line_number = i + 1;
    if (log.complete) malformed(line_number, "records after EXIT");
    const auto fields = split_fields(split.lines[i]);
    if (fields[0] == "REACH") {
      if (fields.size() != 5) malformed(line_number, "REACH needs 4 fields");
      ReachRecord record;
      record.point.method.identifier = require_identifier_field(fields[1], line_number, "method");
      if (!parse_number(fields[2], record.point.location)) {
        malformed(line_number, "invalid location");
      }
      record.point.exception_type =
          require_identifier_field(fields[3], line_number, "exception type");
      if (!parse_number(fields[4], record.count)) malformed(line_number, "invalid count");
      log.records.emplace_back(std::move(record));
    } else if (fields[0] == "INJECT") {
      if (fields.size() != 5) malformed(line_number, "INJECT needs 4 fields");
      InjectRecord record;
      record.point.method.identifier = require_identifier_field(fields[1], line_number, "method");
      if (!parse_number(fields[2], record.point.location)) {
        malformed(line_number, "invalid location");
      }
      record.point.exception_type =
          require_identifier_field(fields[3], line_number, "exception type");
      std::string_view rest = fields[4];
      while (!rest.empty()) {
        const std::size_t pos = rest.find(';');
        const std::string_view frame =
            pos == std::string_view::npos ? rest : rest.substr(0, pos);
        record.stack.push_back(
            model::MethodRef{require_identifier_field(frame, line_number, "stack frame")});
        if (pos == std::string_view::npos) break;
        rest = rest.substr(pos + 1);
      }
      if (record.stack.empty()) malformed(line_number, "empty injection stack");
      if (record.stack.front() != record.point.method) {
        malformed(line_number, "injection stack must start at the throwing method");
      }
      log.records.emplace_back(std::move(record));
    } else if (fields[0] == "CATCH") {
      if (fields.size() != 6) malformed(line_number, "CATCH needs 5 fields");
      CatchRecord record;
      record.exception_type = require_identifier_field(fields[1], line_number, "exception type");
      record.raiser.identifier = require_identifier_field(fields[2], line_number, "method");
      record.catcher.identifier = require_identifier_field(fields[3], line_number, "method");
      if (!parse_number(fields[4], record.distance)) malformed(line_number, "invalid distance");
      try {
        record.kind = model::handler_kind_from_token(fields[5]);
      } catch (const ParseError&) {
        malformed(line_number, "invalid handler kind");
      }
      log.records.emplace_back(std::move(record));
    } else if (fields[0] == "EXIT") {
      if (fields.size() != 2) malformed(line_number, "EXIT needs 1 field");
      if (fields[1] == "NORMAL") {
        log.exit = model::ExitKind::Normal;
      } else if (fields[1] == "CRASH") {
        log.exit = model::ExitKind::Crash;
      } else {
        malformed(line_number, "invalid exit status");
      }
      log.complete = true;
    } else {
      malformed(line_number, "unknown record '" + std::string(fields[0]) + "'");
    }
  }
  return log;
}

MonitorLog load_monitor_log(const std::filesystem::path& file) {
  try {
    return parse_monitor_log_text(slurp(file));
  } catch (const ParseError& e) {
    throw ParseError(file.string() + ": " + e.what());
  }
}

std::uint32_t stack_distance(std::span<const model::MethodRef> stack,
                             const model::MethodRef& raiser, const model::MethodRef& catcher) {
  auto first_occurrence = [&stack](const model::MethodRef& method) -> std::size_t {
    for (std::size_t i = 0; i < stack.size(); ++i) {
      if (stack[i] == method) return i;
    }
    throw UsageError("method '" + method.identifier + "' does not occur in the stack");
  };
  const std::size_t a = first_occurrence(raiser);
  const std::size_t b = first_occurrence(catcher);
  return static_cast<std::uint32_t>(a < b ? b - a : a - b);
}

MonitorLog log_from_execution(const simprog::ExecutionResult& execution,
                              std::span<const model::PerturbationPoint> declared_points) {
  MonitorLog log;
  // interleave injections and catches back into monitored order
  std::size_t next_injection = 0;
  std::size_t next_catch = 0;
  while (next_injection < execution.injection_stacks.size() ||
         next_catch < execution.catch_events.size()) {
    const bool take_injection =
        next_catch >= execution.catch_events.size() ||
        (next_injection < execution.injection_stacks.size() &&
         execution.injection_stacks[next_injection].seq < execution.catch_events[next_catch].seq);
    if (take_injection) {
      const auto& injection = execution.injection_stacks[next_injection++];
      log.records.emplace_back(InjectRecord{injection.point, injection.stack});
    } else {
      const auto& caught = execution.catch_events[next_catch++];
      log.records.emplace_back(CatchRecord{caught.exception_type, caught.raiser, caught.catcher,
                                           caught.stack_distance, caught.kind});
    }
  }
  for (const auto& point : declared_points) {
    const auto it = execution.reach_counts.find(point);
    log.records.emplace_back(
        ReachRecord{point, it == execution.reach_counts.end() ? 0 : it->second});
  }
  if (execution.exit == model::ExitKind::Hang) {
    log.complete = false;  // a frozen target never writes its EXIT record
    log.exit = model::ExitKind::Crash;
  } else {
    log.complete = true;
    log.exit = execution.exit;
  }
  return log;
}

}  // namespace tripleagent::protocol
