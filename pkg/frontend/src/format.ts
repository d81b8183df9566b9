/** Display formatting only; never feeds numbers back into state. */

export function fixed(value: number, places = 3): string {
  return value.toFixed(places);
}

export function percent(value: number, places = 2): string {
  const sign = value > 0 ? "+" : "";
  return `${sign}${value.toFixed(places)}%`;
}

export function hourLabel(hour: number): string {
  return `${String(hour).padStart(2, "0")}:00`;
}

export function monthName(month: number): string {
  return [
    "January", "February", "March", "April", "May", "June",
    "July", "August", "September", "October", "November", "December",
  ][month - 1];
}
