#include <iostream>

#include "user/cli/app.hpp"

int main(int argc, char** argv) { return user::run_cli(argc, argv, std::cout, std::cerr); }
