#pragma once

#include "fpgnn/errors.hpp"

#include <exception>
#include <iostream>

namespace fpgnn::cli {

enum ExitCode : int { ok = 0, failure = 1, config_error = 2, data_error = 3, divergence = 4 };

/// Reports the in-flight exception on stderr and maps it to an exit status.
inline int report_current_exception(const char* program) {
    try {
        throw;
    } catch (const ConfigError& e) {
        std::cerr << program << ": config error: " << e.what() << '\n';
        return config_error;
    } catch (const DomainError& e) {
        std::cerr << program << ": config error: " << e.what() << '\n';
        return config_error;
    } catch (const DataError& e) {
        std::cerr << program << ": data error: " << e.what() << '\n';
        return data_error;
    } catch (const IndexError& e) {
        std::cerr << program << ": data error: " << e.what() << '\n';
        return data_error;
    } catch (const DivergenceError& e) {
        std::cerr << program << ": divergence: " << e.what() << '\n';
        return divergence;
    } catch (const NumericError& e) {
        std::cerr << program << ": divergence: " << e.what() << '\n';
        return divergence;
    } catch (const std::exception& e) {
        std::cerr << program << ": error: " << e.what() << '\n';
        return failure;
    }
}

} // namespace fpgnn::cli
