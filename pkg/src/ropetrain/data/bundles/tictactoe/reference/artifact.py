"""Reference Tic-Tac-Toe implementation (tkinter)."""
import tkinter as tk

CELL = 100
LINES = (
    (0, 1, 2), (3, 4, 5), (6, 7, 8),
    (0, 3, 6), (1, 4, 7), (2, 5, 8),
    (0, 4, 8), (2, 4, 6),
)


class TicTacToe:
    def __init__(self, root):
        self.root = root
        self.root.title("Tic-Tac-Toe")
        tk.Label(root, text="Tic-Tac-Toe", font=("Helvetica", 24)).pack()
        self.status = tk.Label(root, text="Red's turn", font=("Helvetica", 14))
        self.status.pack()
        self.canvas = tk.Canvas(root, width=3 * CELL, height=3 * CELL, bg="white")
        self.canvas.pack()
        self.canvas.bind("<Button-1>", self.on_click)
        root.bind("r", lambda event: self.reset())
        self.reset()

    def reset(self):
        self.board = [None] * 9
        self.current = "Red"
        self.done = False
        self.canvas.delete("all")
        for i in range(1, 3):
            self.canvas.create_line(i * CELL, 0, i * CELL, 3 * CELL)
            self.canvas.create_line(0, i * CELL, 3 * CELL, i * CELL)
        self.status.config(text="Red's turn")

    def on_click(self, event):
        if self.done:
            return
        col, row = event.x // CELL, event.y // CELL
        index = row * 3 + col
        if not (0 <= index < 9) or self.board[index] is not None:
            return
        self.board[index] = self.current
        color = "red" if self.current == "Red" else "blue"
        x, y = col * CELL + CELL // 2, row * CELL + CELL // 2
        self.canvas.create_oval(x - 30, y - 30, x + 30, y + 30, outline=color, width=4)
        winner = self.winning_line()
        if winner:
            self.strike(winner)
            self.status.config(text=f"{self.current} wins! Press r to restart.")
            self.done = True
        elif all(cell is not None for cell in self.board):
            self.status.config(text="Tie game! Press r to restart.")
            self.done = True
        else:
            self.current = "Blue" if self.current == "Red" else "Red"
            self.status.config(text=f"{self.current}'s turn")

    def winning_line(self):
        for line in LINES:
            a, b, c = line
            if self.board[a] is not None and self.board[a] == self.board[b] == self.board[c]:
                return line
        return None

    def strike(self, line):
        def center(i):
            return (i % 3) * CELL + CELL // 2, (i // 3) * CELL + CELL // 2

        x0, y0 = center(line[0])
        x1, y1 = center(line[2])
        self.canvas.create_line(x0, y0, x1, y1, width=5, fill="black")


if __name__ == "__main__":
    root = tk.Tk()
    TicTacToe(root)
    root.mainloop()
