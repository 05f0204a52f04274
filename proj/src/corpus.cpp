#include "sqlctx/corpus.hpp"

#include <algorithm>
#include <set>

#include "sqlctx/error.hpp"
#include "sqlctx/json_io.hpp"
#include "sqlctx/random.hpp"

namespace sqlctx {

std::string_view to_string(PositionStrategy position) {
  switch (position) {
    case PositionStrategy::Uniform: return "uniform";
    case PositionStrategy::Beginning: return "beginning";
    case PositionStrategy::Middle: return "middle";
    case PositionStrategy::End: return "end";
    case PositionStrategy::Bimodal: return "bimodal";
  }
  return "uniform";
}

std::optional<PositionStrategy> parse_position(std::string_view name) {
  for (auto p : {PositionStrategy::Uniform, PositionStrategy::Beginning, PositionStrategy::Middle,
                 PositionStrategy::End, PositionStrategy::Bimodal}) {
    if (iequals(name, to_string(p))) return p;
  }
  return std::nullopt;
}

void CorpusConfig::validate() const {
  if (info.amount.has_value() == info.density.has_value()) {
    throw Error(ErrorCode::InvalidConfig, "exactly one of info amount or density must be set");
  }
  if (info.density && !(*info.density > 0.0 && *info.density <= 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "density must be in (0, 1]");
  }
  std::size_t budget = info_budget();
  if (budget == 0 || budget > context_tokens) {
    throw Error(ErrorCode::InvalidConfig, "info budget " + std::to_string(budget) +
                                              " must be in (0, " + std::to_string(context_tokens) + "]");
  }
}

std::size_t CorpusConfig::info_budget() const {
  if (info.amount) return *info.amount;
  if (info.density) return static_cast<std::size_t>(*info.density * static_cast<double>(context_tokens));
  return 0;
}

Partition partition_tables(const Database& db, const QuerySpec& spec) {
  auto referenced = referenced_tables(spec.ast);
  for (const auto& name : referenced) {
    if (!db.find(name)) throw Error(ErrorCode::UnknownTable, name + " is not in database " + db.name);
  }
  Partition p;
  for (const auto& t : db.tables()) {
    (referenced.count(to_lower(t.name())) ? p.relevant : p.irrelevant).push_back(t.name());
  }
  return p;
}

std::string verbalize_row(const Table& table, const Row& row, std::string_view template_text) {
  std::string out;
  std::size_t i = 0;
  while (i < template_text.size()) {
    char c = template_text[i];
    std::size_t close = c == '{' ? template_text.find('}', i + 1) : std::string_view::npos;
    if (close == std::string_view::npos) {
      out += c == '\n' || c == '\r' ? ' ' : c;
      ++i;
      continue;
    }
    std::string_view name = template_text.substr(i + 1, close - i - 1);
    auto col = table.column_index(name);
    if (!col) {
      throw Error(ErrorCode::MissingPlaceholderColumn,
                  "template placeholder {" + std::string(name) + "} is not a column of " + table.name());
    }
    const Value& v = row.at(*col);
    if (v.is_null()) {
      throw Error(ErrorCode::NullInPlaceholder,
                  table.name() + "." + table.columns()[*col].name + " is Null in a verbalized row");
    }
    for (char ch : render(v)) out += ch == '\n' || ch == '\r' ? ' ' : ch;
    i = close + 1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Join links

namespace {

struct Scope {
  std::vector<std::pair<std::string, const Table*>> bound;  // exposed name -> table
  const Scope* outer = nullptr;
};

const Table* resolve_column_table(const Expr& col, const Scope& scope) {
  for (const Scope* s = &scope; s; s = s->outer) {
    const Table* hit = nullptr;
    for (const auto& [exposed, table] : s->bound) {
      if (!table) continue;
      if (!col.qualifier.empty() && !iequals(exposed, col.qualifier) && !iequals(table->name(), col.qualifier)) {
        continue;
      }
      if (table->column_index(col.name)) {
        if (hit && hit != table) return nullptr;  // ambiguous
        hit = table;
      }
    }
    if (hit) return hit;
  }
  return nullptr;
}

void collect_links(const Query& q, const Database& db, const Scope* outer, std::vector<JoinLink>& out);

void links_in_expr(const Expr& e, const Database& db, const Scope& scope, bool conjunct,
                   std::vector<JoinLink>& out) {
  if (conjunct && e.kind == ExprKind::Binary && e.binary == BinaryOp::Eq &&
      e.args[0].kind == ExprKind::Column && e.args[1].kind == ExprKind::Column) {
    const Table* a = resolve_column_table(e.args[0], scope);
    const Table* b = resolve_column_table(e.args[1], scope);
    if (a && b && a != b) {
      out.push_back({a->name(), a->columns()[*a->column_index(e.args[0].name)].name, b->name(),
                     b->columns()[*b->column_index(e.args[1].name)].name});
    }
  }
  bool and_node = e.kind == ExprKind::Binary && e.binary == BinaryOp::And;
  for (const auto& a : e.args) links_in_expr(a, db, scope, conjunct && and_node, out);
  if (e.subquery) collect_links(*e.subquery, db, &scope, out);
}

void collect_links(const Query& q, const Database& db, const Scope* outer, std::vector<JoinLink>& out) {
  if (q.is_set_operation()) {
    collect_links(*q.left, db, outer, out);
    collect_links(*q.right, db, outer, out);
    return;
  }
  const Select& s = q.select;
  Scope scope;
  scope.outer = outer;
  scope.bound.emplace_back(s.from.exposed_name(), db.find(s.from.table));
  for (const auto& j : s.joins) scope.bound.emplace_back(j.table.exposed_name(), db.find(j.table.table));
  for (const auto& j : s.joins) {
    if (j.on) links_in_expr(*j.on, db, scope, true, out);
  }
  if (s.where) links_in_expr(*s.where, db, scope, true, out);
  for (const auto& item : s.items) links_in_expr(item.expr, db, scope, false, out);
  if (s.having) links_in_expr(*s.having, db, scope, false, out);
}

std::string link_key(const Value& v) {
  switch (v.kind()) {
    case Kind::Null: return {};
    case Kind::Integer: return "d" + render(Value(static_cast<double>(v.as_integer())));
    case Kind::Real: return "d" + render(v);
    case Kind::Text: return "t" + v.as_text();
  }
  return {};
}

const std::vector<std::string>& variants_for(const Templates& templates, const std::string& table) {
  for (const auto& [name, variants] : templates) {
    if (iequals(name, table)) {
      if (variants.empty()) break;
      return variants;
    }
  }
  throw Error(ErrorCode::InvalidConfig, "no verbalization templates for table " + table);
}

std::string one_line(std::string text) {
  std::replace(text.begin(), text.end(), '\n', ' ');
  std::replace(text.begin(), text.end(), '\r', ' ');
  return text;
}

}  // namespace

std::vector<JoinLink> join_links(const QueryAst& ast, const Database& db) {
  std::vector<JoinLink> out;
  collect_links(ast, db, nullptr, out);
  return out;
}

// ---------------------------------------------------------------------------
// Sampling

SampleResult sample_documents(const Database& db, const std::vector<std::string>& tables,
                              std::size_t budget, const Templates& templates,
                              const TokenCounter& counter, std::uint64_t seed,
                              const std::vector<JoinLink>& links) {
  struct Pool {
    const Table* table = nullptr;
    const std::vector<std::string>* variants = nullptr;
    std::vector<std::size_t> remaining;
    std::uint64_t rotation = 0;
    std::size_t drawn = 0;
    // (column in this table, index of the partner pool, partner column)
    std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> links;
    std::map<std::size_t, std::set<std::string>> drawn_values;  // column -> keys drawn so far
  };

  Rng rng(seed);
  std::vector<Pool> pools;
  for (const auto& name : tables) {
    const Table& t = db.at(name);
    Pool p;
    p.table = &t;
    p.variants = &variants_for(templates, t.name());
    p.remaining.resize(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) p.remaining[i] = i;
    rng.shuffle(p.remaining);
    p.rotation = rng.below(p.variants->size());
    pools.push_back(std::move(p));
  }
  auto pool_of = [&](const std::string& table) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < pools.size(); ++i) {
      if (iequals(pools[i].table->name(), table)) return i;
    }
    return std::nullopt;
  };
  for (const auto& link : links) {
    auto a = pool_of(link.left_table), b = pool_of(link.right_table);
    if (!a || !b || *a == *b) continue;
    auto ca = pools[*a].table->column_index(link.left_column);
    auto cb = pools[*b].table->column_index(link.right_column);
    if (!ca || !cb) continue;
    pools[*a].links.emplace_back(*ca, *b, *cb);
    pools[*b].links.emplace_back(*cb, *a, *ca);
  }

  SampleResult result;
  std::size_t used = 0;
  while (true) {
    std::size_t total = 0;
    for (const auto& p : pools) total += p.remaining.size();
    if (total == 0) break;
    std::uint64_t r = rng.below(total);
    std::size_t pick = 0;
    while (r >= pools[pick].remaining.size()) {
      r -= pools[pick].remaining.size();
      ++pick;
    }
    Pool& pool = pools[pick];

    std::size_t slot = 0;
    if (!pool.links.empty()) {
      for (std::size_t i = 0; i < pool.remaining.size(); ++i) {
        const Row& row = pool.table->rows()[pool.remaining[i]];
        bool linked = false;
        for (const auto& [col, partner, partner_col] : pool.links) {
          auto it = pools[partner].drawn_values.find(partner_col);
          if (it != pools[partner].drawn_values.end() && it->second.count(link_key(row[col]))) {
            linked = true;
            break;
          }
        }
        if (linked) {
          slot = i;
          break;
        }
      }
    }
    std::size_t row_id = pool.remaining[slot];
    pool.remaining.erase(pool.remaining.begin() + static_cast<std::ptrdiff_t>(slot));

    const Row& row = pool.table->rows()[row_id];
    const auto& variant = (*pool.variants)[(pool.rotation + pool.drawn) % pool.variants->size()];
    ++pool.drawn;
    Document doc{verbalize_row(*pool.table, row, variant), pool.table->name(), row_id, false, 0};
    doc.tokens = counter(doc.text);
    if (used + doc.tokens > budget) {
      result.refused_tokens = doc.tokens;
      result.infeasible = budget > 0 && result.documents.empty();
      break;
    }
    used += doc.tokens;
    for (const auto& link : pool.links) {
      std::size_t col = std::get<0>(link);
      if (!row[col].is_null()) pool.drawn_values[col].insert(link_key(row[col]));
    }
    result.documents.push_back(std::move(doc));
  }
  return result;
}

std::vector<Document> fill_with_dummies(const std::vector<std::string>& pool, std::size_t budget,
                                        const TokenCounter& counter, std::uint64_t seed) {
  std::vector<Document> out;
  if (pool.empty()) return out;
  std::vector<std::size_t> order(pool.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  std::size_t used = 0;
  for (std::size_t k = 0;; ++k) {
    std::size_t index = order[k % order.size()];
    Document d{one_line(pool[index]), "", index, false, 0};
    d.tokens = counter(d.text);
    if (d.tokens == 0 || used + d.tokens > budget) break;
    used += d.tokens;
    out.push_back(std::move(d));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Positioning

Arrangement arrange_documents(std::vector<Document> relevant, std::vector<Document> irrelevant,
                              PositionStrategy position, std::uint64_t seed) {
  Rng rng(seed);
  rng.shuffle(relevant);
  for (auto& d : relevant) d.relevant = true;
  for (auto& d : irrelevant) d.relevant = false;

  const std::size_t r = relevant.size(), i = irrelevant.size(), n = r + i;
  std::vector<bool> slot_relevant(n, false);
  auto mark = [&](std::size_t from, std::size_t count) {
    for (std::size_t k = 0; k < count; ++k) slot_relevant[from + k] = true;
  };
  switch (position) {
    case PositionStrategy::Beginning: mark(0, r); break;
    case PositionStrategy::End: mark(i, r); break;
    case PositionStrategy::Middle: mark((i + 1) / 2, r); break;
    case PositionStrategy::Bimodal: {
      std::size_t head = (r + 1) / 2;
      mark(0, head);
      mark(n - (r - head), r - head);
      break;
    }
    case PositionStrategy::Uniform:
      if (i == 0) {
        mark(0, r);
      } else {
        for (std::size_t k = 1; k <= r; ++k) slot_relevant[k * n / (r + 1) - 1] = true;
      }
      break;
  }

  Arrangement a;
  std::size_t next_r = 0, next_i = 0;
  for (std::size_t s = 0; s < n; ++s) {
    if (slot_relevant[s]) {
      a.relevant_positions.push_back(s);
      a.documents.push_back(std::move(relevant[next_r++]));
    } else {
      a.documents.push_back(std::move(irrelevant[next_i++]));
    }
  }
  return a;
}

std::string join_documents(const std::vector<Document>& documents) {
  std::string out;
  for (std::size_t k = 0; k < documents.size(); ++k) {
    if (k) out += '\n';
    out += documents[k].text;
  }
  return out;
}

std::string assemble_context(const std::vector<Document>& relevant, const std::vector<Document>& irrelevant,
                             PositionStrategy position, std::uint64_t seed) {
  return join_documents(arrange_documents(relevant, irrelevant, position, seed).documents);
}

// ---------------------------------------------------------------------------
// Instances

std::vector<std::string> BenchmarkInstance::documents() const {
  std::vector<std::string> out;
  if (context.empty()) return out;
  std::size_t start = 0;
  while (true) {
    std::size_t end = context.find('\n', start);
    out.push_back(context.substr(start, end == std::string::npos ? std::string::npos : end - start));
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return out;
}

Database sampled_database(const Database& db, const Provenance& provenance) {
  Database out;
  out.name = db.name;
  for (const auto& [table, rows] : provenance.relevant_rows) out.add_table(db.at(table).select_rows(rows));
  return out;
}

std::string instance_id(const std::string& query_id, const CorpusConfig& config) {
  std::string info = config.info.density ? "d" + render(Value(*config.info.density))
                                         : "a" + std::to_string(config.info_budget());
  return query_id + "-c" + std::to_string(config.context_tokens) + "-" + info + "-" +
         std::string(to_string(config.position)) + "-s" + std::to_string(config.seed);
}

namespace {

std::map<std::string, std::vector<std::size_t>> row_ids(const std::vector<Document>& docs) {
  std::map<std::string, std::vector<std::size_t>> out;
  for (const auto& d : docs) {
    if (!d.table.empty()) out[d.table].push_back(d.row);
  }
  for (auto& [t, ids] : out) std::sort(ids.begin(), ids.end());
  return out;
}

std::size_t token_sum(const std::vector<Document>& docs) {
  std::size_t s = 0;
  for (const auto& d : docs) s += d.tokens;
  return s;
}

}  // namespace

BenchmarkInstance build_instance(const Database& db, const Templates& templates, const QuerySpec& spec,
                                 const CorpusConfig& config, const BuildOptions& options) {
  config.validate();
  Partition partition = partition_tables(db, spec);
  const std::size_t info = config.info_budget();
  const auto links = join_links(spec.ast, db);

  BenchmarkInstance inst;
  std::vector<Document> relevant;
  std::uint64_t round_seed = 0;
  int attempts = 0;
  for (int attempt = 0; attempt < std::max(1, options.max_attempts); ++attempt) {
    attempts = attempt + 1;
    round_seed = derive_seed(config.seed, static_cast<std::uint64_t>(attempt));
    SampleResult s = sample_documents(db, partition.relevant, info, templates, options.counter,
                                      derive_seed(round_seed, 1), links);
    if (s.infeasible) {
      throw Error(ErrorCode::BudgetInfeasible, "no relevant document of query " + spec.id + " fits in " +
                                                   std::to_string(info) + " tokens");
    }
    relevant = std::move(s.documents);
    inst.provenance.relevant_rows = row_ids(relevant);
    for (const auto& t : partition.relevant) inst.provenance.relevant_rows.try_emplace(t);
    inst.gold = execute(spec.ast, sampled_database(db, inst.provenance));
    if (!inst.gold.rows.empty()) break;
  }

  const std::size_t relevant_tokens = token_sum(relevant);
  const std::size_t rest = config.context_tokens - relevant_tokens;
  std::vector<Document> irrelevant;
  if (!partition.irrelevant.empty()) {
    irrelevant = sample_documents(db, partition.irrelevant, rest, templates, options.counter,
                                  derive_seed(round_seed, 2))
                     .documents;
  } else {
    irrelevant = fill_with_dummies(db.dummy_documents, rest, options.counter, derive_seed(round_seed, 2));
  }

  Provenance& p = inst.provenance;
  p.irrelevant_rows = row_ids(irrelevant);
  for (const auto& d : irrelevant) {
    if (d.table.empty()) p.dummy_documents.push_back(d.row);
  }
  p.relevant_tokens = relevant_tokens;
  p.irrelevant_tokens = token_sum(irrelevant);
  p.total_tokens = p.relevant_tokens + p.irrelevant_tokens;
  p.attempts = attempts;
  p.sample_seed = round_seed;

  Arrangement arranged = arrange_documents(std::move(relevant), std::move(irrelevant), config.position,
                                           derive_seed(round_seed, 3));
  p.relevant_positions = arranged.relevant_positions;
  p.document_count = arranged.documents.size();

  inst.instance_id = instance_id(spec.id, config);
  inst.database = db.name;
  inst.query_id = spec.id;
  inst.question = spec.question;
  inst.sql = spec.sql;
  for (auto t : spec.types) inst.types.emplace_back(to_string(t));
  inst.difficulty = std::string(to_string(spec.difficulty));
  inst.config = config;
  inst.context = join_documents(arranged.documents);
  return inst;
}

nlohmann::json instance_to_json(const BenchmarkInstance& inst) {
  using nlohmann::json;
  const Provenance& p = inst.provenance;
  json prov = {{"relevant_rows", p.relevant_rows},
               {"irrelevant_rows", p.irrelevant_rows},
               {"dummy_documents", p.dummy_documents},
               {"relevant_positions", p.relevant_positions},
               {"document_count", p.document_count},
               {"tokens", {{"relevant", p.relevant_tokens}, {"irrelevant", p.irrelevant_tokens}, {"total", p.total_tokens}}},
               {"attempts", p.attempts},
               {"sample_seed", p.sample_seed}};
  return {{"instance_id", inst.instance_id},
          {"database", inst.database},
          {"query_id", inst.query_id},
          {"question", inst.question},
          {"sql", inst.sql},
          {"types", inst.types},
          {"difficulty", inst.difficulty},
          {"position", std::string(to_string(inst.config.position))},
          {"context_tokens", inst.config.context_tokens},
          {"info_tokens", inst.config.info_budget()},
          {"density", inst.config.info.density ? json(*inst.config.info.density) : json(nullptr)},
          {"seed", inst.config.seed},
          {"context", inst.context},
          {"gold", result_to_json(inst.gold)},
          {"provenance", std::move(prov)}};
}

BenchmarkInstance instance_from_json(const nlohmann::json& j) {
  BenchmarkInstance inst;
  try {
    inst.instance_id = j.at("instance_id").get<std::string>();
    inst.database = j.at("database").get<std::string>();
    inst.query_id = j.at("query_id").get<std::string>();
    inst.question = j.at("question").get<std::string>();
    inst.sql = j.at("sql").get<std::string>();
    inst.types = j.at("types").get<std::vector<std::string>>();
    inst.difficulty = j.at("difficulty").get<std::string>();
    auto pos = parse_position(j.at("position").get<std::string>());
    if (!pos) throw Error(ErrorCode::InvalidConfig, "unknown position " + j.at("position").dump());
    inst.config.position = *pos;
    inst.config.context_tokens = j.at("context_tokens").get<std::size_t>();
    if (j.at("density").is_null()) {
      inst.config.info.amount = j.at("info_tokens").get<std::size_t>();
    } else {
      inst.config.info.density = j.at("density").get<double>();
    }
    inst.config.seed = j.at("seed").get<std::uint64_t>();
    inst.context = j.at("context").get<std::string>();
    inst.gold = result_from_json(j.at("gold"));
    const auto& pj = j.at("provenance");
    Provenance& p = inst.provenance;
    p.relevant_rows = pj.at("relevant_rows").get<std::map<std::string, std::vector<std::size_t>>>();
    p.irrelevant_rows = pj.at("irrelevant_rows").get<std::map<std::string, std::vector<std::size_t>>>();
    p.dummy_documents = pj.at("dummy_documents").get<std::vector<std::size_t>>();
    p.relevant_positions = pj.at("relevant_positions").get<std::vector<std::size_t>>();
    p.document_count = pj.at("document_count").get<std::size_t>();
    p.relevant_tokens = pj.at("tokens").at("relevant").get<std::size_t>();
    p.irrelevant_tokens = pj.at("tokens").at("irrelevant").get<std::size_t>();
    p.total_tokens = pj.at("tokens").at("total").get<std::size_t>();
    p.attempts = pj.at("attempts").get<int>();
    p.sample_seed = pj.at("sample_seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("malformed instance record: ") + e.what());
  }
  return inst;
}

}  // namespace sqlctx
