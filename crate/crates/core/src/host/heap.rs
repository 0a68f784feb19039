use super::value::{Address, Cell};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("dangling reference {0}")]
pub struct DanglingRef(pub Address);

/// The program heap. Cells are never freed, so an address is live exactly
/// when it is below the allocation counter.
#[derive(Debug, Clone, Default)]
pub struct Heap {
    cells: Vec<Cell>,
}

impl Heap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn alloc(&mut self, cell: Cell) -> Address {
        let addr = Address(self.cells.len() as u64);
        self.cells.push(cell);
        addr
    }

    pub fn get(&self, addr: Address) -> Result<&Cell, DanglingRef> {
        self.cells.get(addr.0 as usize).ok_or(DanglingRef(addr))
    }

    pub fn get_mut(&mut self, addr: Address) -> Result<&mut Cell, DanglingRef> {
        self.cells.get_mut(addr.0 as usize).ok_or(DanglingRef(addr))
    }

    pub fn set(&mut self, addr: Address, cell: Cell) -> Result<(), DanglingRef> {
        *self.get_mut(addr)? = cell;
        Ok(())
    }

    pub fn is_live(&self, addr: Address) -> bool {
        (addr.0 as usize) < self.cells.len()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Address, &Cell)> {
        self.cells
            .iter()
            .enumerate()
            .map(|(i, c)| (Address(i as u64), c))
    }

    /// Bitwise comparison of every cell (floats by bit pattern).
    pub fn same(&self, other: &Heap) -> bool {
        self.cells.len() == other.cells.len()
            && self.cells.iter().zip(&other.cells).all(|(a, b)| a.same(b))
    }
}
