#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tripleagent/simprog.hpp"

namespace tripleagent::simprog {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& locus, const std::string& what) {
  throw ParseError(locus + ": " + what);
}

const json& require(const json& obj, const char* key, const std::string& locus) {
  if (!obj.is_object() || !obj.contains(key)) {
    fail(locus, std::string("missing required field '") + key + "'");
  }
  return obj.at(key);
}

std::uint32_t require_count(const json& value, const std::string& locus) {
  if (!value.is_number_unsigned() || value.get<std::uint64_t>() == 0 ||
      value.get<std::uint64_t>() > 1'000'000) {
    fail(locus, "expected a positive integer count");
  }
  return static_cast<std::uint32_t>(value.get<std::uint64_t>());
}

std::string require_identifier(const json& value, const std::string& locus) {
  if (!value.is_string() || !model::is_wire_identifier(value.get<std::string>())) {
    fail(locus, "expected an identifier made of [A-Za-z0-9_/$.]");
  }
  return value.get<std::string>();
}

void check_version(const json& doc, const std::string& locus) {
  const json& version = require(doc, "format_version", locus);
  if (!version.is_number_integer() || version.get<int>() != 1) {
    fail(locus, "unsupported format_version (expected 1)");
  }
}

std::vector<Statement> parse_statements(const json& list, const std::string& locus);

Statement parse_statement(const json& stmt, const std::string& locus) {
  if (!stmt.is_object() || stmt.empty()) fail(locus, "statement must be a tagged object");
  if (stmt.contains("emit")) {
    if (stmt.size() != 1 || !stmt.at("emit").is_string()) fail(locus, "malformed emit");
    return {EmitStmt{stmt.at("emit").get<std::string>()}};
  }
  if (stmt.contains("call")) {
    if (stmt.size() != 1) fail(locus, "malformed call");
    return {CallStmt{model::MethodRef{require_identifier(stmt.at("call"), locus)}}};
  }
  if (stmt.contains("throw")) {
    if (stmt.size() != 1) fail(locus, "malformed throw");
    return {ThrowStmt{require_identifier(stmt.at("throw"), locus)}};
  }
  if (stmt.contains("try")) {
    if (stmt.size() != 2 || !stmt.contains("catch")) {
      fail(locus, "try statement needs exactly 'try' and 'catch'");
    }
    TryStmt out;
    out.body = parse_statements(stmt.at("try"), locus + ".try");
    const json& clauses = stmt.at("catch");
    if (!clauses.is_array() || clauses.empty()) fail(locus, "catch must be a non-empty array");
    for (std::size_t i = 0; i < clauses.size(); ++i) {
      const std::string clause_locus = locus + ".catch[" + std::to_string(i) + "]";
      const json& clause = clauses.at(i);
      CatchClause parsed;
      const json& types = require(clause, "types", clause_locus);
      if (!types.is_array() || types.empty()) fail(clause_locus, "types must be a non-empty array");
      for (const json& t : types) {
        if (t.is_string() && t.get<std::string>() == "*") {
          parsed.types.push_back("*");
        } else {
          parsed.types.push_back(require_identifier(t, clause_locus));
        }
      }
      const json& body = require(clause, "body", clause_locus);
      parsed.body = parse_statements(body, clause_locus + ".body");
      if (clause.size() != 2) fail(clause_locus, "unknown field in catch clause");
      out.clauses.push_back(std::move(parsed));
    }
    return {std::move(out)};
  }
  if (stmt.contains("loop")) {
    if (stmt.size() != 2 || !stmt.contains("body")) {
      fail(locus, "loop statement needs exactly 'loop' and 'body'");
    }
    LoopStmt out;
    out.count = require_count(stmt.at("loop"), locus);
    out.body = parse_statements(stmt.at("body"), locus + ".body");
    return {std::move(out)};
  }
  if (stmt.contains("hang")) {
    if (stmt.size() != 1 || !stmt.at("hang").is_boolean() || !stmt.at("hang").get<bool>()) {
      fail(locus, "malformed hang (expected {\"hang\": true})");
    }
    return {HangStmt{}};
  }
  fail(locus, "unknown statement kind");
}

std::vector<Statement> parse_statements(const json& list, const std::string& locus) {
  if (!list.is_array()) fail(locus, "expected a statement array");
  std::vector<Statement> out;
  out.reserve(list.size());
  for (std::size_t i = 0; i < list.size(); ++i) {
    out.push_back(parse_statement(list.at(i), locus + "[" + std::to_string(i) + "]"));
  }
  return out;
}

void collect_call_targets(const std::vector<Statement>& stmts,
                          std::vector<std::pair<model::MethodRef, std::string>>& out,
                          const std::string& locus) {
  for (std::size_t i = 0; i < stmts.size(); ++i) {
    const std::string here = locus + "[" + std::to_string(i) + "]";
    const auto& node = stmts[i].node;
    if (const auto* call = std::get_if<CallStmt>(&node)) {
      out.emplace_back(call->target, here);
    } else if (const auto* try_stmt = std::get_if<TryStmt>(&node)) {
      collect_call_targets(try_stmt->body, out, here + ".try");
      for (std::size_t c = 0; c < try_stmt->clauses.size(); ++c) {
        collect_call_targets(try_stmt->clauses[c].body, out,
                             here + ".catch[" + std::to_string(c) + "].body");
      }
    } else if (const auto* loop = std::get_if<LoopStmt>(&node)) {
      collect_call_targets(loop->body, out, here + ".body");
    }
  }
}

json parse_document(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string(what) + ": " + e.what());
  }
}

std::string slurp(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open " + file.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace

ProgramModel parse_program(const std::string& text) {
  const json doc = parse_document(text, "program");
  check_version(doc, "program");
  ProgramModel program;
  program.entry.identifier = require_identifier(require(doc, "entry", "program"), "program.entry");
  const json& methods = require(doc, "methods", "program");
  if (!methods.is_object() || methods.empty()) fail("program.methods", "expected a non-empty map");
  for (const auto& [name, body] : methods.items()) {
    const std::string locus = "methods." + name;
    if (!model::is_wire_identifier(name)) {
      fail(locus, "method name must be made of [A-Za-z0-9_/$.]");
    }
    MethodBody parsed;
    const json& throws = require(body, "throws", locus);
    if (!throws.is_array()) fail(locus + ".throws", "expected an array of exception types");
    for (const json& t : throws) {
      const std::string type = require_identifier(t, locus + ".throws");
      if (std::find(parsed.declared_exceptions.begin(), parsed.declared_exceptions.end(), type) ==
          parsed.declared_exceptions.end()) {
        parsed.declared_exceptions.push_back(type);
      }
    }
    std::sort(parsed.declared_exceptions.begin(), parsed.declared_exceptions.end());
    parsed.statements = parse_statements(require(body, "body", locus), locus + ".body");
    if (parsed.statements.empty()) fail(locus + ".body", "method body must not be empty");
    if (body.size() != 2) fail(locus, "unknown field in method (expected 'throws' and 'body')");
    program.methods.emplace(model::MethodRef{name}, std::move(parsed));
  }
  if (!program.methods.contains(program.entry)) {
    fail("program.entry", "entry method '" + program.entry.identifier + "' is not defined");
  }
  std::vector<std::pair<model::MethodRef, std::string>> targets;
  for (const auto& [name, body] : program.methods) {
    collect_call_targets(body.statements, targets, "methods." + name.identifier + ".body");
  }
  for (const auto& [target, locus] : targets) {
    if (!program.methods.contains(target)) {
      fail(locus, "call target '" + target.identifier + "' is not defined");
    }
  }
  return program;
}

ProgramModel load_program(const std::filesystem::path& file) {
  try {
    return parse_program(slurp(file));
  } catch (const ParseError& e) {
    throw ParseError(file.string() + ": " + e.what());
  }
}

WorkloadSpec parse_workload(const std::string& text) {
  const json doc = parse_document(text, "workload");
  check_version(doc, "workload");
  WorkloadSpec workload;
  const json& invocations = require(doc, "invocations", "workload");
  if (!invocations.is_array()) fail("workload.invocations", "expected an array");
  for (std::size_t i = 0; i < invocations.size(); ++i) {
    const std::string locus = "workload.invocations[" + std::to_string(i) + "]";
    const json& inv = invocations.at(i);
    WorkloadSpec::Invocation parsed;
    parsed.method.identifier = require_identifier(require(inv, "method", locus), locus);
    parsed.repeat = require_count(require(inv, "repeat", locus), locus);
    if (inv.size() != 2) fail(locus, "unknown field in invocation");
    workload.invocations.push_back(std::move(parsed));
  }
  return workload;
}

WorkloadSpec load_workload(const std::filesystem::path& file) {
  try {
    return parse_workload(slurp(file));
  } catch (const ParseError& e) {
    throw ParseError(file.string() + ": " + e.what());
  }
}

void validate_workload(const ProgramModel& program, const WorkloadSpec& workload) {
  for (const auto& inv : workload.invocations) {
    if (!program.methods.contains(inv.method)) {
      throw ParseError("workload invokes unknown method '" + inv.method.identifier + "'");
    }
  }
}

std::vector<model::PerturbationPoint> enumerate_points(const ProgramModel& program,
                                                       std::string_view filter) {
  std::vector<model::PerturbationPoint> points;
  for (const auto& [method, body] : program.methods) {
    if (!filter.empty() && !method.identifier.starts_with(filter)) continue;
    for (std::uint32_t location = 0; location < body.statements.size(); ++location) {
      for (const std::string& exception_type : body.declared_exceptions) {
        points.push_back({method, location, exception_type});
      }
    }
  }
  // map iteration is already sorted by method; finish the (method, l, e) order
  std::sort(points.begin(), points.end());
  return points;
}

}  // namespace tripleagent::simprog
