#include "program_gen.hpp"

#include <array>
#include <string_view>
#include <vector>

namespace ekt::testkit {

namespace {

class Builder {
public:
    Builder(std::mt19937_64& engine, const GeneratorOptions& options)
        : engine_(engine)
        , options_(options)
    {
    }

    std::size_t below(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_); }

    bool chance(double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_) < p; }

    std::string literal()
    {
        switch (below(6)) {
        case 0:
            return std::to_string(below(10));
        case 1:
            return std::to_string(1 + below(1000));
        case 2:
            return std::to_string(below(100)) + "." + std::to_string(below(100));
        case 3:
            return "." + std::to_string(1 + below(9));
        case 4:
            return std::to_string(1 + below(9)) + "e" + std::to_string(below(4));
        default:
            return std::to_string(1 + below(50)) + ".0";
        }
    }

    std::string operand()
    {
        if (!defined_.empty() && chance(0.6)) {
            return defined_[below(defined_.size())];
        }
        return literal();
    }

    // Nonzero divisors only, so valid programs stay valid.
    std::string divisor()
    {
        return std::to_string(1 + below(12));
    }

    std::string expr(std::size_t depth)
    {
        if (depth >= options_.max_depth || chance(0.3)) {
            return operand();
        }
        switch (below(5)) {
        case 0:
            return "(" + expr(depth + 1) + ")";
        case 1:
            return "-" + expr(depth + 1);
        default: {
            static constexpr std::array<std::string_view, 4> ops = {" + ", " - ", " * ", " / "};
            const auto op = ops[below(ops.size())];
            const std::string rhs = op == " / " ? divisor() : expr(depth + 1);
            return expr(depth + 1) + std::string(op) + rhs;
        }
        }
    }

    std::string fresh_name()
    {
        static constexpr std::array<std::string_view, 6> stems = {"n", "t", "total_", "x", "cost", "_tmp"};
        return std::string(stems[below(stems.size())]) + std::to_string(defined_.size());
    }

    GeneratedProgram build()
    {
        GeneratedProgram program;
        if (chance(options_.error_rate)) {
            program.flavor = static_cast<ProgramFlavor>(1 + below(5));
        }
        const std::size_t statements = 1 + below(options_.max_statements);
        const std::size_t broken_at = below(statements);
        std::string& out = program.source;
        for (std::size_t i = 0; i < statements; ++i) {
            if (chance(0.15)) {
                out += "# step " + std::to_string(i) + "\n";
            }
            if (chance(0.05)) {
                out += "\n";
            }
            const bool last = i + 1 == statements;
            std::string target = last ? "answer" : fresh_name();
            if (last && program.flavor == ProgramFlavor::MissingAnswer) {
                target = "result";
            }
            std::string rhs = expr(1);
            if (i == broken_at) {
                switch (program.flavor) {
                case ProgramFlavor::UndefinedVariable:
                    rhs += " + undefined_" + std::to_string(i);
                    break;
                case ProgramFlavor::DivisionByZero:
                    rhs = "(" + rhs + ") / (" + std::to_string(i) + " - " + std::to_string(i) + ")";
                    break;
                case ProgramFlavor::Overflow:
                    rhs = "1e300 * 1e300 + " + rhs;
                    break;
                case ProgramFlavor::Syntax: {
                    static constexpr std::array<std::string_view, 6> breakers = {" +", " ** 2", " // 3", ")",
                                                                                 " % 2", " == 1"};
                    rhs += std::string(breakers[below(breakers.size())]);
                    break;
                }
                default:
                    break;
                }
            }
            out += target + " = " + rhs;
            if (chance(0.1)) {
                out += "  # note";
            }
            out += "\n";
            if (!last) {
                defined_.push_back(target);
            }
        }
        return program;
    }

private:
    std::mt19937_64& engine_;
    const GeneratorOptions& options_;
    std::vector<std::string> defined_;
};

} // namespace

GeneratedProgram generate_program(std::mt19937_64& engine, const GeneratorOptions& options)
{
    return Builder(engine, options).build();
}

} // namespace ekt::testkit
