#include <cstdio>
int main() { std::puts("onnpic placeholder"); return 0; }
