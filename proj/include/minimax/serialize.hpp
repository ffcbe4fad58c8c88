#pragma once

#include "minimax/limitdist.hpp"
#include "minimax/montecarlo.hpp"

#include "json.hpp"

#include <string>

namespace minimax {

using Json = nlohmann::json;

// "%.17g": round-trippable and byte-stable, used for all CSV numbers.
std::string format_real(Real v);

// Non-finite values have no JSON number representation; they serialize as
// strings ("inf", "-inf", "nan").
Json json_real(Real v);

Json matrix_json(const Matrix& m);  // {rows, cols, data(row-major)}
Matrix matrix_from_json(const Json& j);
Json vector_json(const Vector& v);
Vector vector_from_json(const Json& j);

Json xi_point_json(const XiPoint& p);
Json solution_json(const MinimaxSolution& sol);
Json certificate_json(const Certificate& c);
Json reduction_json(const ReductionData& rd);
Json solution_model_json(const SolutionLimitModel& model);
Json value_model_json(const ValueLimitModel& model);
Json dirderiv_json(const DirDerivEstimate& fd, const DirDerivFormula* formula);
Json replication_summary_json(const ReplicationSet& set);
Json comparison_json(const ComparisonReport& report);

std::string dataset_csv(const Dataset& data);              // j,x1,...,xd
std::string draws_csv(const Matrix& draws);                // s,eta1,...,etan
std::string value_draws_csv(const Vector& draws);          // s,value
std::string replications_csv(const ReplicationSet& set);   // r,status,sqrtN_value_err,...

std::string render_comparison_table(const ComparisonReport& report);
std::string render_certificates_table(const std::vector<Certificate>& certs);
std::string render_dirderiv_table(const DirDerivEstimate& fd, const DirDerivFormula* formula);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace minimax
