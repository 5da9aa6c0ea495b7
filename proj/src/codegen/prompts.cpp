#include <algorithm>
#include <regex>
#include <sstream>

#include <openssl/evp.h>

#include "glns/codegen.hpp"

namespace glns {

std::string_view to_string(Action action) {
    switch (action) {
        case Action::I1: return "i1";
        case Action::I2: return "i2";
        case Action::M1: return "m1";
        case Action::M2: return "m2";
        case Action::C1: return "c1";
        case Action::C2: return "c2";
    }
    return "?";
}

Action parse_action(std::string_view text) {
    for (Action a : {Action::I1, Action::I2, Action::M1, Action::M2, Action::C1, Action::C2})
        if (to_string(a) == text) return a;
    throw ConfigError("unknown action '" + std::string(text) + "'");
}

OperatorKind action_kind(Action action) {
    return action == Action::I2 ? OperatorKind::Repair : OperatorKind::Destroy;
}

void GenerationRequest::validate() const {
    std::size_t want = 0;
    switch (action) {
        case Action::I1:
        case Action::I2: want = 0; break;
        case Action::M1:
        case Action::M2: want = 1; break;
        case Action::C1:
        case Action::C2: want = 2; break;
    }
    if (parents.size() != want)
        throw RequestError(std::string(to_string(action)) + " takes " + std::to_string(want) + " parent(s), got " +
                           std::to_string(parents.size()));
    if (action == Action::C1 && parents[0].kind != parents[1].kind)
        throw RequestError("c1 parents must be of the same kind");
    if (action == Action::C2 && (parents[0].kind != OperatorKind::Destroy || parents[1].kind != OperatorKind::Repair))
        throw RequestError("c2 parents must be a destroy operator followed by a repair operator");
    const OperatorKind expect = action_kind(action);
    if (action == Action::I1 || action == Action::I2) {
        for (const auto& r : references)
            if (r.kind != expect) throw RequestError("reference operators must match the initialised kind");
    }
}

std::string_view task_description(ProblemKind problem) {
    switch (problem) {
        case ProblemKind::TSP:
            return "Traveling Salesman Problem (TSP): visit every city exactly once and return to the starting city so "
                   "that the total length of the closed tour is as small as possible. A solution is a list of city "
                   "indices. distance_matrix[i][j] is the distance between cities i and j.";
        case ProblemKind::CVRP:
            return "Capacitated Vehicle Routing Problem (CVRP): serve every customer exactly once with vehicles that "
                   "leave the depot and return to it, keeping the total demand on each route within the vehicle "
                   "capacity and minimising the total travel distance. A solution is a list of routes, each a list of "
                   "customer indices without the depot. problem_data is a dict with 'distance_matrix', 'demands', "
                   "'capacity' and 'depot_idx'.";
        case ProblemKind::OVRP:
            return "Open Vehicle Routing Problem (OVRP): serve every customer exactly once with vehicles that leave the "
                   "depot but do not return to it, keeping the total demand on each route within the vehicle capacity "
                   "and minimising the total travel distance, where the arc from the last customer back to the depot "
                   "is not counted. A solution is a list of routes, each a list of customer indices without the depot. "
                   "problem_data is a dict with 'distance_matrix', 'demands', 'capacity', 'depot_idx' and "
                   "'open_routes' (always True).";
    }
    return {};
}

namespace {

std::string third_input(ProblemKind problem) {
    return problem == ProblemKind::TSP ? "distance_matrix" : "problem_data";
}

std::string kind_title(OperatorKind kind) { return kind == OperatorKind::Destroy ? "Destroy" : "Repair"; }

std::string code(const OperatorRecord& record, ProblemKind problem) {
    const std::string source =
        record.source.empty() && record.native() ? template_source(record.template_name, record.params, problem) : record.source;
    std::string out = "```python\n" + source;
    if (source.empty() || source.back() != '\n') out += '\n';
    return out + "```\n";
}

std::string listing(const std::vector<OperatorRecord>& records, ProblemKind problem) {
    if (records.empty()) return "(none)\n";
    std::ostringstream out;
    for (std::size_t i = 0; i < records.size(); ++i)
        out << "Operator " << (i + 1) << ": " << records[i].description << "\n" << code(records[i], problem);
    return out.str();
}

constexpr const char* kAdviceM1 = "Generate novel algorithmic mechanisms or formulas to replace existing logic components.";
constexpr const char* kAdviceM2 =
    "Adjust current parameter settings (e.g., the degree of randomization or greedy thresholds) to optimize operator "
    "behavior.";

}  // namespace

std::string render_prompt(const GenerationRequest& request) {
    request.validate();
    const ProblemKind problem = request.problem;
    const std::string third = third_input(problem);
    std::ostringstream out;
    switch (request.action) {
        case Action::I1:
            out << "The task is to design a novel Destroy Operator for a Large Neighborhood Search (LNS) framework. "
                   "Given a complete solution sequence ("
                << (problem == ProblemKind::TSP ? "a tour of cities for TSP" : "a list of routes for the VRP")
                << ") and a target number of elements to remove (destroy_cnt), the function must determine which "
                   "elements to remove. The objective is to develop a removal strategy that effectively perturbs the "
                   "current solution. This allows the subsequent Repair operator to reconstruct the solution in a way "
                   "that helps escape local optima and minimizes the total cost.\n\n"
                   "You are an expert in heuristic optimization algorithms, specifically Adaptive Large Neighborhood "
                   "Search (ALNS).\n"
                   "Your task is to design a new 'Destroy Operator' (removal operator) for the following problem:\n\n"
                   "Problem Description:\n"
                << task_description(problem) << "\n\n"
                << "Existing Destroy Operators (Reference):\n"
                << listing(request.references, problem) << "\n"
                << "Requirements:\n"
                   "1. First, describe your new algorithm and main steps in one sentence. The description must be "
                   "inside a brace. Next, implement it in Python as a function named destroy.\n"
                   "2. This function must accept 3 inputs: 'current_solution', 'destroy_cnt', '"
                << third << "'.\n"
                << "3. The function must return 2 outputs: 'removed_elements', 'partial_solution'.\n"
                   "4. The logic should be strictly different from the existing ones provided in the reference to "
                   "improve population diversity.\n"
                   "5. Do not give additional explanations.\n";
            break;
        case Action::I2:
            out << "The task is to design a novel Repair Operator (Insertion Operator) for a Large Neighborhood Search "
                   "(LNS) framework. Given a partial solution partial_solution (where some elements have been removed) "
                   "and a list of removed_elements, the function must determine the best positions to re-insert these "
                   "elements to restore a complete solution. The objective is to reconstruct the solution in a way "
                   "that minimizes the total cost\n\n"
                   "You are an expert in heuristic optimization algorithms, specifically Large Neighborhood Search "
                   "(LNS).\n"
                   "Your task is to design a new 'Repair Operator' (insertion operator) for the following problem:\n\n"
                   "Problem Description:\n"
                << task_description(problem) << "\n\n"
                << "Existing Repair Operators (Reference):\n"
                << listing(request.references, problem) << "\n"
                << "Requirements:\n"
                   "1. First, describe your new algorithm and main steps in one sentence. The description must be "
                   "inside a brace. Next, implement it in Python as a function named repair.\n"
                   "2. This function must accept 3 inputs: 'partial_solution', 'removed_elements', '"
                << third << "'.\n"
                << "3. The function must return 1 output: 'complete_solution'.\n"
                   "4. The logic should be innovative and distinct from the reference operators to ensure diverse "
                   "reconstruction paths.\n"
                   "5. Do not give additional explanations.\n";
            break;
        case Action::M1:
        case Action::M2: {
            const auto& parent = request.parents[0];
            out << "You are an algorithm optimizer. We have a " << kind_title(parent.kind) << " operator for LNS.\n\n"
                << "Problem Description:\n"
                << task_description(problem) << "\n\n"
                << "Strategy:\n"
                << (request.action == Action::M1 ? kAdviceM1 : kAdviceM2) << "\n\n"
                << "Current Code:\n"
                << code(parent, problem) << "\n"
                << "Task:\n"
                   "Refine and improve this operator code based on the strategy above.\n"
                   "1. Refine and improve this operator strictly following the strategy provided above.\n"
                   "2. If you need helper functions, define them INSIDE the main function.\n"
                   "3. Do not give additional explanations.\n";
            break;
        }
        case Action::C1: {
            const std::string title = kind_title(request.parents[0].kind);
            out << "You are an expert in heuristic optimization.\n"
                << "Your task is to create a NEW " << title
                << " operator by combining the ideas/logic of two parent operators.\n\n"
                << "Problem Description:\n"
                << task_description(problem) << "\n\n"
                << "Parent 1 Code (Inspiration Source):\n"
                << code(request.parents[0], problem) << "\n"
                << "Parent 2 Code (Structural Base):\n"
                << code(request.parents[1], problem) << "\n"
                << "Task:\n"
                   "Please create a new algorithm that has a similar form to Parent 2 and is inspired by Parent 1. The "
                   "new algorithm should outperform both parents.\n"
                   "1. First, list the common ideas in Parent 1 that may give good performances.\n"
                   "2. Second, based on the common idea, describe the design idea of the new algorithm and its main "
                   "steps in one sentence.\n"
                   "3. Next, implement it in Python.\n\n"
                   "Requirements:\n"
                << "1. The new operator MUST follow the standard LNS " << title << " signature strictly.\n"
                << "2. Define all helper functions INSIDE the main function.\n"
                   "3. Do not give additional explanations.\n";
            break;
        }
        case Action::C2:
            out << "You are an expert in heuristic optimization.\n"
                   "We are employing a \"Synergistic Joint Crossover (Structural Coupling)\" strategy to evolve LNS "
                   "operators.\n\n"
                   "Problem Description:\n"
                << task_description(problem) << "\n\n"
                << "Selected High-Synergy Pair:\n"
                   "- Parent Destroy Operator:\n"
                << code(request.parents[0], problem) << "- Parent Repair Operator:\n"
                << code(request.parents[1], problem) << "\n"
                << "Task:\n"
                   "Evolve this pair as a UNIFIED ENTITY to create a new Destroy-Repair pair.\n"
                   "The goal is to address the inherent coupling between destroy and repair actions.\n"
                   "Specifically, ensure that the generated Repair operator is specifically tailored to reconstruct "
                   "the structural defects introduced by the generated Destroy operator, thereby maximizing their "
                   "synergistic performance.\n\n"
                   "Requirements:\n"
                   "1. Design a NEW Destroy operator and a NEW Repair operator.\n"
                   "2. The new Destroy operator should create specific structural defects.\n"
                   "3. The new Repair operator must be designed to fix these specific defects efficiently.\n"
                   "4. Both must follow standard LNS signatures strictly.\n"
                   "5. Define all helper functions INSIDE the main functions.\n"
                   "6. Return ONE code block containing BOTH the new Destroy operator and the new Repair operator.\n"
                   "7. Do not give additional explanations.\n";
            break;
    }
    return out.str();
}

// ---- response parsing ---------------------------------------------------------------

namespace {

struct Scan {
    std::vector<std::string> blocks;
    std::string outside;  // text outside fences
};

Scan scan_fences(std::string_view text) {
    Scan scan;
    std::istringstream in{std::string(text)};
    std::string line;
    bool inside = false;
    std::string current;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string_view trimmed = line;
        while (!trimmed.empty() && (trimmed.front() == ' ' || trimmed.front() == '\t')) trimmed.remove_prefix(1);
        if (trimmed.substr(0, 3) == "```") {
            if (inside) {
                scan.blocks.push_back(current);
                current.clear();
            }
            inside = !inside;
            continue;
        }
        if (inside) current += line + "\n";
        else scan.outside += line + "\n";
    }
    if (inside && !current.empty()) scan.blocks.push_back(current);  // unterminated final fence
    return scan;
}

std::string first_brace(const std::string& text) {
    const auto open = text.find('{');
    if (open == std::string::npos) return {};
    int depth = 0;
    for (std::size_t i = open; i < text.size(); ++i) {
        if (text[i] == '{') ++depth;
        else if (text[i] == '}' && --depth == 0) {
            std::string inner = text.substr(open + 1, i - open - 1);
            const auto b = inner.find_first_not_of(" \t\n");
            const auto e = inner.find_last_not_of(" \t\n");
            return b == std::string::npos ? std::string() : inner.substr(b, e - b + 1);
        }
    }
    return {};
}

const std::regex kTopLevelDef(R"(^def\s+([A-Za-z_][A-Za-z0-9_]*)\s*\()");

std::optional<OperatorKind> entry_kind(const std::string& name) {
    if (name == "destroy") return OperatorKind::Destroy;
    if (name == "repair" || name == "insert") return OperatorKind::Repair;
    return std::nullopt;
}

std::optional<OperatorKind> detect_kind(const std::string& source) {
    std::istringstream in(source);
    std::string line;
    while (std::getline(in, line)) {
        std::smatch m;
        if (std::regex_search(line, m, kTopLevelDef))
            if (auto k = entry_kind(m[1].str())) return k;
    }
    return std::nullopt;
}

std::vector<Artifact> split_pair(const std::string& block) {
    std::vector<std::string> lines;
    {
        std::istringstream in(block);
        std::string line;
        while (std::getline(in, line)) lines.push_back(line);
    }
    struct Segment {
        std::size_t begin;
        std::string name;
    };
    std::vector<Segment> segments;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::smatch m;
        if (!std::regex_search(lines[i], m, kTopLevelDef)) continue;
        std::size_t begin = i;
        while (begin > 0 && !lines[begin - 1].empty() && (lines[begin - 1][0] == '#' || lines[begin - 1][0] == '@'))
            --begin;
        if (!segments.empty()) begin = std::max(begin, segments.back().begin + 1);
        segments.push_back({begin, m[1].str()});
    }
    auto join = [&](std::size_t from, std::size_t to) {
        std::string out;
        for (std::size_t i = from; i < to; ++i) out += lines[i] + "\n";
        return out;
    };
    const std::string preamble = segments.empty() ? std::string() : join(0, segments.front().begin);
    std::string helpers, destroy, repair;
    for (std::size_t s = 0; s < segments.size(); ++s) {
        const std::size_t end = s + 1 < segments.size() ? segments[s + 1].begin : lines.size();
        const std::string body = join(segments[s].begin, end);
        const auto kind = entry_kind(segments[s].name);
        if (!kind) helpers += body;
        else if (*kind == OperatorKind::Destroy && destroy.empty()) destroy = body;
        else if (*kind == OperatorKind::Repair && repair.empty()) repair = body;
    }
    if (destroy.empty() || repair.empty())
        throw ResponseParseError("c2 code block must define both a destroy and a repair (or insert) function");
    return {{OperatorKind::Destroy, preamble + helpers + destroy}, {OperatorKind::Repair, preamble + helpers + repair}};
}

}  // namespace

GenerationResponse parse_response(std::string_view text, Action action) {
    GenerationResponse response;
    response.raw = std::string(text);
    Scan scan = scan_fences(text);
    response.description = first_brace(scan.outside);
    if (scan.blocks.empty()) throw ResponseParseError("response contains no code block");

    if (action == Action::C2) {
        std::string all;
        for (const auto& b : scan.blocks) all += b;
        response.artifacts = split_pair(all);
        return response;
    }
    const std::string& source = scan.blocks.front();
    std::optional<OperatorKind> kind = detect_kind(source);
    if (action == Action::I1 || action == Action::I2) kind = action_kind(action);
    if (!kind) throw ResponseParseError("code block defines no destroy, repair or insert function");
    response.artifacts.push_back({*kind, source});
    return response;
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1)
        throw Error("sha256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(length * 2);
    for (unsigned int i = 0; i < length; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

}  // namespace glns
