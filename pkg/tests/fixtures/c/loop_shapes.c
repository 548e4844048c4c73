int main() {
  int i, j, k = 0;
  for (i = 10; i > 0; i--) k++;
  for (int j2 = 0; j2 <= 4; j2 += 2) k++;
  for (i = 0; i < 100; i++) for (j = 0; j < 3; j++) k++;
  for (i = 0; i < n_unknown(); i++) k++;
  return k;
}
